use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tightsurf_cli::{emit_summary, parse_config, run_pipeline, Task};

#[derive(Parser)]
#[command(name = "tightsurf", version, about = "Curvature, asymptotic-curve and Gauss-Codazzi reports for tight surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tightness integrals and the parabolic-curve decomposition
    Analyze(Run),
    /// Asymptotic curves traced from the parabolic curves
    Trace(Run),
    /// Rigidity invariant on every closed asymptotic curve
    Invariant(Run),
    /// Characteristic solves, symmetrizer search and energy audit
    Codazzi(Run),
    /// Adapted chart with its certificate
    Chart(Run),
    /// Every task listed in the config
    All(Run),
}

#[derive(Args)]
struct Run {
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (run, task) = match cli.command {
        Command::Analyze(r) => (r, Some(Task::Analyze)),
        Command::Trace(r) => (r, Some(Task::Trace)),
        Command::Invariant(r) => (r, Some(Task::Invariant)),
        Command::Codazzi(r) => (r, Some(Task::Codazzi)),
        Command::Chart(r) => (r, Some(Task::Chart)),
        Command::All(r) => (r, None),
    };
    match execute(run, task) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(run: Run, task: Option<Task>) -> tightsurf::Result<ExitCode> {
    let text = fs::read_to_string(&run.config)?;
    let mut cfg = parse_config(&text)?;
    if let Some(t) = task {
        cfg.tasks = vec![t];
    }
    if let Some(out) = run.out {
        cfg.out = out;
    }
    if let Some(seed) = run.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = run.tol {
        cfg.override_tolerance(tol);
    }
    let manifest = run_pipeline(&cfg)?;
    let summary = emit_summary(&manifest, &cfg.out)?;
    fs::write(cfg.out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(if manifest.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
