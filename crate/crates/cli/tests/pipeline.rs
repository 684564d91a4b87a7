use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;

use sha2::{Digest, Sha256};
use tightsurf::Error;
use tightsurf_cli::config::schedule;
use tightsurf_cli::pipeline::TaskRecord;
use tightsurf_cli::{emit_summary, parse_config, run_pipeline, Manifest, Status, Task};

const TORUS: &str = "[surface]\nfamily = torus\naxis_radius = 2\ntube_radius = 1\n";

fn with_out(text: &str, dir: &Path) -> String {
    format!("out = {}\n{text}", dir.display())
}

fn record(m: &Manifest, task: Task) -> &TaskRecord {
    m.tasks.iter().find(|t| t.task == task).unwrap()
}

fn headline(m: &Manifest, task: Task, label: &str) -> String {
    record(m, task).rows.iter().find(|r| r.label == label).unwrap().headline.clone()
}

#[test]
fn minimal_torus_config_fills_defaults() {
    let cfg = parse_config("[surface]\nfamily = torus\n").unwrap();
    assert_eq!(cfg.tasks, Task::ALL.to_vec());
    assert_eq!(cfg.seed, 0);
    assert_eq!(cfg.quadrature.n, 512);
    assert_eq!(cfg.quadrature.tolerance, 1e-6);
}

#[test]
fn fat_tube_is_rejected() {
    let err = parse_config("[surface]\nfamily = torus\naxis_radius = 2\ntube_radius = 3\n").unwrap_err();
    match err {
        Error::Config { line, message } => {
            assert_eq!(line, 2);
            assert_eq!(message, "tube radius must be < axis radius");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn misspelled_key_gets_a_suggestion() {
    let err = parse_config("[surface]\nfamily = torus\n\nquadrture.n = 256\n").unwrap_err();
    match err {
        Error::Config { line, message } => {
            assert_eq!(line, 4);
            assert!(message.contains("`quadrture.n`") && message.contains("did you mean `quadrature.n`"), "{message}");
        }
        other => panic!("{other:?}"),
    }
    let err = parse_config("[surface]\nfamily = torus\n[quadrature]\nresolution = 3\n").unwrap_err();
    assert!(matches!(err, Error::Config { line: 4, .. }));
}

#[test]
fn syntax_errors_carry_line_numbers() {
    for (text, line) in [
        ("[surface]\nfamily = torus\n[quadrature\n", 3),
        ("seed 4\n[surface]\nfamily = torus\n", 1),
        ("seed = -4\n[surface]\nfamily = torus\n", 1),
        ("seed = 1\nseed = 2\n[surface]\nfamily = torus\n", 2),
        ("[surface]\nfamily = torus\nradius = 1\n", 3),
        ("[surface]\nfamily = torus\n[tasks]\nlist = analyze, plot\n", 4),
        ("[surface]\nfamily = torus\n[codazzi]\nt_min = 0.5\n", 4),
    ] {
        match parse_config(text) {
            Err(Error::Config { line: l, .. }) => assert_eq!(l, line, "{text}"),
            other => panic!("{text}: {other:?}"),
        }
    }
}

#[test]
fn empty_task_list_succeeds_with_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(&with_out(&format!("{TORUS}[tasks]\nlist =\n"), dir.path())).unwrap();
    let m = run_pipeline(&cfg).unwrap();
    assert!(m.tasks.is_empty());
    assert_eq!(m.exit_code(), 0);
    assert_eq!(emit_summary(&m, dir.path()).unwrap(), "");
}

#[test]
fn torus_full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(&with_out(TORUS, dir.path())).unwrap();
    let m = run_pipeline(&cfg).unwrap();
    assert!(m.passed(), "{m:#?}");
    assert_eq!(m.tasks.iter().map(|t| t.task).collect::<Vec<_>>(), Task::ALL.to_vec());
    assert_eq!(headline(&m, Task::Analyze, "parabolic"), "curves = 2, S- components = 1");
    assert_eq!(headline(&m, Task::Decompose, "decompose"), "closed asymptotic curves = 0");
    assert_eq!(headline(&m, Task::Codazzi, "uniqueness"), "max|U| = 0.0e0");

    // manifest hashes match the files on disk
    for t in &m.tasks {
        for a in &t.artifacts {
            let bytes = fs::read(dir.path().join(&a.path)).unwrap();
            assert_eq!(format!("{:x}", Sha256::digest(&bytes)), a.sha256);
            assert_eq!(bytes.len(), a.bytes);
        }
    }
    let on_disk: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(on_disk["tasks"].as_array().unwrap().len(), 6);

    let summary = emit_summary(&m, dir.path()).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "tightness  ∫_{S+}K dA = 12.56637  PASS (target 4π ± 1e-6)");
    assert!(lines.contains(&"uniqueness  max|U| = 0.0e0  PASS"), "{summary}");

    let analysis: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("analyze.json")).unwrap()).unwrap();
    assert_eq!(analysis["seed"], 0);
    let s_plus = analysis["result"]["tightness"]["positive_curvature"].as_f64().unwrap();
    assert!((s_plus - 4.0 * PI).abs() < 1e-6);
}

#[test]
fn annulus_invariant_report() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[surface]\nfamily = annulus\n[invariant]\nt0 = 0\n[tasks]\nlist = invariant\n";
    let m = run_pipeline(&parse_config(&with_out(text, dir.path())).unwrap()).unwrap();
    assert!(m.passed(), "{m:#?}");
    let v: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("invariant.json")).unwrap()).unwrap();
    let line = v["result"].as_array().unwrap().iter().find(|e| e["t"].as_f64().unwrap().abs() < 1e-8).unwrap();
    let inv = &line["invariant"];
    assert!((inv["coordinate"].as_f64().unwrap() + PI).abs() < 1e-6);
    assert!(inv["discrepancy"].as_f64().unwrap() < 1e-6);
    assert!(inv["intrinsic"].as_f64().unwrap().abs() > 3.0);
}

#[test]
fn failed_search_fails_only_its_task() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[surface]\nfamily = rotated-annulus\n[codazzi]\nfield = collar\nnx = 21\nnt = 11\n\
                lambda_bar_start = -0.001\ndoublings = 0\n[tasks]\nlist = codazzi, chart\n";
    let m = run_pipeline(&parse_config(&with_out(text, dir.path())).unwrap()).unwrap();
    assert_eq!(m.exit_code(), 1);
    assert_eq!(record(&m, Task::Codazzi).status, Status::Fail);
    assert_eq!(record(&m, Task::Chart).status, Status::Pass);
    let summary = emit_summary(&m, dir.path()).unwrap();
    let row = summary.lines().find(|l| l.starts_with("symmetrizer")).unwrap();
    assert!(row.starts_with("symmetrizer  min-eig = -") && row.ends_with("  FAIL"), "{row}");
}

#[test]
fn failed_prerequisite_skips_dependents() {
    let dir = tempfile::tempdir().unwrap();
    // a bounded patch has no coordinate circle for return maps
    let text = "[surface]\nfamily = graph\na = 1\nc = -1\nhalf_width = 0.5\n[tasks]\nlist = invariant, codazzi\n[codazzi]\nfield = wave\n";
    let m = run_pipeline(&parse_config(&with_out(text, dir.path())).unwrap()).unwrap();
    assert_eq!(record(&m, Task::Decompose).status, Status::Fail);
    let inv = record(&m, Task::Invariant);
    assert!(inv.error.as_deref().unwrap().contains("prerequisite `decompose` failed"));
    assert_eq!(record(&m, Task::Codazzi).status, Status::Pass);
}

#[test]
fn runnable_alone_inserts_prerequisites_once() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = parse_config(&with_out(TORUS, dir.path())).unwrap();
    cfg.tasks = vec![Task::Invariant, Task::Decompose];
    assert_eq!(schedule(&cfg.tasks), vec![Task::Analyze, Task::Decompose, Task::Invariant]);
    let m = run_pipeline(&cfg).unwrap();
    assert_eq!(m.tasks.iter().map(|t| t.task).collect::<Vec<_>>(), vec![Task::Analyze, Task::Decompose, Task::Invariant]);
}

#[test]
fn same_seed_gives_identical_artifacts() {
    let text = "[surface]\nfamily = rotated-annulus\n[codazzi]\nfield = collar\nnx = 21\nnt = 21\nn = 32\nperturbations = 3\n[tasks]\nlist = codazzi\n";
    let run = |seed: u64| {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = parse_config(&with_out(text, dir.path())).unwrap();
        cfg.seed = seed;
        let m = run_pipeline(&cfg).unwrap();
        assert!(m.passed(), "{m:#?}");
        (fs::read(dir.path().join("codazzi.json")).unwrap(), fs::read(dir.path().join("manifest.json")).unwrap())
    };
    let (a, ma) = run(11);
    let (b, mb) = run(11);
    let (c, _) = run(12);
    assert_eq!(a, b);
    assert_eq!(ma, mb);
    assert_ne!(a, c);
}

#[test]
fn summary_requires_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[surface]\nfamily = rotated-annulus\n[tasks]\nlist = chart\n";
    let m = run_pipeline(&parse_config(&with_out(text, dir.path())).unwrap()).unwrap();
    fs::remove_file(dir.path().join("chart.csv")).unwrap();
    assert!(emit_summary(&m, dir.path()).is_err());
}

#[test]
fn binary_applies_overrides_and_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, format!("{TORUS}[quadrature]\nn = 128\nregions = 64\n")).unwrap();
    let out = dir.path().join("out");
    let run = |extra: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_tightsurf"))
            .arg("analyze")
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .args(extra)
            .output()
            .unwrap()
    };
    let ok = run(&["--seed", "9", "--tol", "1e-4"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(out.join("analyze.json")).unwrap()).unwrap();
    assert_eq!(v["seed"], 9);
    assert_eq!(v["result"]["tightness"]["tolerance"], 1e-4);
    assert!(out.join("summary.txt").is_file());

    let strict = run(&["--tol", "1e-300"]);
    assert_eq!(strict.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&strict.stdout).contains("FAIL"));

    fs::write(&cfg, "[surface]\nfamily = torus\ntube_radius = 3\n").unwrap();
    let bad = run(&[]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("tube radius must be < axis radius"));
}
