//! Runs the scheduled tasks, writes their artifacts and the manifest.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use tightsurf::adapted::{asymptotic_adapted_chart, AdaptedSpec};
use tightsurf::asymptotic::{trace, TraceControls};
use tightsurf::charts::{chart_certificate, m_zero_chart, Along, BaseCurve, StripSpec};
use tightsurf::codazzi::{
    build_symmetrizer, collar_model, energy_audit, solve, wave_field, Coupling, DataSpec, FieldGrid, SearchControls,
    SolveControls, SymmetrizerKind, SystemField, WeightedNorm,
};
use tightsurf::contour::{decompose_regions, DecompositionSpec, RegionDecomposition};
use tightsurf::integrals::{tightness_report, QuadratureSpec};
use tightsurf::invariant::{rigidity_invariant_curve, rigidity_invariant_line, RigidityInvariant};
use tightsurf::returnmap::{cylinder_decomposition, CylinderDecomposition, DecompositionControls, Swapped};
use tightsurf::surface::{Axis, Domain};
use tightsurf::{Error, FormSource, ParamPoint, Result, Surface};

use crate::config::{schedule, ChartChoice, FieldChoice, RunConfig, Source, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Reported without a pass criterion.
    Info,
}

impl Status {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
        }
    }
}

/// One line of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub label: String,
    pub headline: String,
    pub status: Status,
    pub target: Option<String>,
}

impl Row {
    fn new(label: &str, headline: String, status: Status) -> Self {
        Self { label: label.into(), headline, status, target: None }
    }

    fn target(mut self, target: String) -> Self {
        self.target = Some(target);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskRecord {
    pub task: Task,
    pub status: Status,
    pub rows: Vec<Row>,
    pub error: Option<String>,
    pub artifacts: Vec<ArtifactEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub seed: u64,
    pub source: String,
    pub tasks: Vec<TaskRecord>,
}

impl Manifest {
    pub fn passed(&self) -> bool {
        self.tasks.iter().all(|t| t.status != Status::Fail)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }
}

/// Results handed to dependent tasks.
#[derive(Debug, Clone)]
enum Handoff {
    Nothing,
    Regions(Box<RegionDecomposition>),
    ClosedCurves(Vec<(i8, f64)>),
}

struct Output {
    rows: Vec<Row>,
    files: Vec<(String, Vec<u8>)>,
    handoff: Handoff,
}

#[derive(Serialize)]
struct Record<'a, T: Serialize> {
    task: &'a str,
    seed: u64,
    result: T,
}

fn json<T: Serialize>(task: Task, seed: u64, result: T) -> Result<(String, Vec<u8>)> {
    let mut bytes = serde_json::to_vec_pretty(&Record { task: task.name(), seed, result }).map_err(|e| Error::Io(e.to_string()))?;
    bytes.push(b'\n');
    Ok((format!("{}.json", task.name()), bytes))
}

fn csv(name: &str, seed: u64, body: String) -> (String, Vec<u8>) {
    (name.to_string(), format!("# seed = {seed}\n{body}").into_bytes())
}

/// Chart with a periodic `x` axis in which closed asymptotic curves are
/// graphs over `x`: a surface with its coordinates swapped, or prescribed
/// forms as given.
enum Annular<'a> {
    Swapped(Swapped<Surface>),
    Forms(&'a dyn FormSource),
}

impl<'a> Annular<'a> {
    fn of(src: &'a Source) -> Result<Self> {
        match src {
            Source::Surface(s) if s.domain.v.periodic => Ok(Annular::Swapped(Swapped(s.clone()))),
            Source::Forms(f) if f.domain.u.periodic => Ok(Annular::Forms(f)),
            _ => Err(Error::Precondition("no coordinate circle to build return maps on".into())),
        }
    }

    fn forms(&self) -> &dyn FormSource {
        match self {
            Annular::Swapped(s) => s,
            Annular::Forms(f) => *f,
        }
    }

    /// Default `t` window: the longest run of `K < 0` along `x = x0` for a
    /// surface, the whole chart for prescribed forms.
    fn band(&self) -> Result<Option<(f64, f64)>> {
        let d = self.forms().domain();
        match self {
            Annular::Forms(_) => Ok(Some((d.v.min, d.v.max))),
            Annular::Swapped(s) => negative_run(s, d.u.min, d.v),
        }
    }
}

fn negative_run(s: &dyn FormSource, x0: f64, axis: Axis) -> Result<Option<(f64, f64)>> {
    let n = 1024;
    let h = axis.length() / if axis.periodic { n as f64 } else { (n - 1) as f64 };
    let neg: Vec<bool> = (0..n)
        .map(|k| s.forms(ParamPoint::new(x0, axis.min + k as f64 * h)).map(|fd| fd.k < 0.0))
        .collect::<Result<_>>()?;
    let (mut best, mut run) = (None::<(usize, usize)>, None::<usize>);
    // unroll a periodic axis twice so a run across the seam stays whole
    let len = if axis.periodic { 2 * n } else { n };
    for k in 0..=len {
        let inside = k < len && neg[k % n];
        match (inside, run) {
            (true, None) => run = Some(k),
            (false, Some(a)) => {
                let l = (k - a).min(n);
                if best.map_or(true, |(_, bl)| l > bl) {
                    best = Some((a, l));
                }
                run = None;
            }
            _ => {}
        }
    }
    Ok(best.map(|(a, l)| (axis.min + a as f64 * h, axis.min + (a + l - 1) as f64 * h)))
}

fn analyze(cfg: &RunConfig, src: &Source) -> Result<Output> {
    let s = src.forms();
    let chi = match src {
        Source::Surface(s) => s.euler_characteristic,
        Source::Forms(_) => None,
    };
    let q = &cfg.quadrature;
    let spec = QuadratureSpec { tolerance: q.tolerance, ..QuadratureSpec::with_resolution(q.n) };
    let rep = tightness_report(s, chi, &spec)?;
    let regions = decompose_regions(s, chi, &DecompositionSpec { nu: q.regions, nv: q.regions, ..DecompositionSpec::default() })?;
    let mut rows = vec![{
        let row = Row::new(
            "tightness",
            format!("∫_{{S+}}K dA = {:.5}", rep.positive_curvature),
            if chi.is_some() { Status::from_bool(rep.tight) } else { Status::Info },
        );
        row.target(format!("target 4π ± {:e}", q.tolerance))
    }];
    if let (Some(bound), Some(defect)) = (rep.absolute_bound, rep.gauss_bonnet_defect) {
        rows.push(Row::new(
            "gauss-bonnet",
            format!("∫K dA - 2πχ = {defect:.1e}"),
            Status::from_bool(defect.abs() < q.tolerance),
        ));
        rows.push(
            Row::new(
                "absolute",
                format!("∫|K| dA = {:.5}", rep.total_absolute),
                if rep.tight { Status::from_bool((rep.total_absolute - bound).abs() < q.tolerance) } else { Status::Info },
            )
            .target(format!("bound {bound:.5}")),
        );
    }
    let monotone = regions.parabolic_curves.iter().all(|c| c.monotone) && regions.unclosed.is_empty();
    rows.push(Row::new(
        "parabolic",
        format!("curves = {}, S- components = {}", regions.parabolic_curves.len(), regions.negative_components.len()),
        Status::from_bool(monotone),
    ));
    #[derive(Serialize)]
    struct Analysis<'a> {
        tightness: &'a tightsurf::integrals::TightnessReport,
        parabolic_curves: usize,
        negative_components: &'a [tightsurf::contour::NegativeComponent],
        positive_area: f64,
        negative_area: f64,
        unclosed: &'a [usize],
    }
    let files = vec![
        json(
            Task::Analyze,
            cfg.seed,
            Analysis {
                tightness: &rep,
                parabolic_curves: regions.parabolic_curves.len(),
                negative_components: &regions.negative_components,
                positive_area: regions.positive_area,
                negative_area: regions.negative_area,
                unclosed: &regions.unclosed,
            },
        )?,
        csv("parabolic_curves.csv", cfg.seed, regions.curves_csv()),
    ];
    Ok(Output { rows, files, handoff: Handoff::Regions(Box::new(regions)) })
}

fn trace_task(cfg: &RunConfig, src: &Source, regions: &RegionDecomposition) -> Result<Output> {
    let s = src.forms();
    let controls = TraceControls { max_length: cfg.trace.max_length, ..TraceControls::default() };
    let starts: Vec<(usize, ParamPoint)> = regions
        .parabolic_curves
        .iter()
        .flat_map(|c| {
            let n = c.curve.samples.len();
            let k = cfg.trace.starts.min(n);
            (0..k).map(move |i| (c.id, c.curve.samples[i * n / k].point))
        })
        .collect();
    let traced: Vec<_> = starts
        .par_iter()
        .flat_map_iter(|&(id, p)| [1i8, -1].map(move |f| (id, p, f)))
        .map(|(id, p, f)| (id, p, f, trace(s, p, f, &controls)))
        .collect();
    #[derive(Serialize)]
    struct Summary {
        curve: usize,
        start: ParamPoint,
        family: i8,
        outcome: std::result::Result<Traced, String>,
    }
    #[derive(Serialize)]
    struct Traced {
        termination: tightsurf::curve::Termination,
        closed: bool,
        length: f64,
        end: ParamPoint,
    }
    let mut body = String::from("trace,family,u,v\n");
    let mut summaries = Vec::new();
    for (k, (id, p, f, r)) in traced.into_iter().enumerate() {
        let outcome = match r {
            Ok(c) => {
                for smp in &c.samples {
                    body.push_str(&format!("{k},{f},{:.12e},{:.12e}\n", smp.point.u, smp.point.v));
                }
                Ok(Traced {
                    termination: c.termination,
                    closed: c.closed,
                    length: c.length(),
                    end: c.last().map_or(p, |l| l.point),
                })
            }
            Err(e) => Err(e.to_string()),
        };
        summaries.push(Summary { curve: id, start: p, family: f, outcome });
    }
    let failed = summaries.iter().filter(|s| s.outcome.is_err()).count();
    let closed = summaries.iter().filter(|s| matches!(&s.outcome, Ok(t) if t.closed)).count();
    let rows = vec![Row::new(
        "trace",
        format!("traces = {}, closed = {closed}, failed = {failed}", summaries.len()),
        Status::from_bool(failed == 0),
    )];
    let files = vec![json(Task::Trace, cfg.seed, &summaries)?, csv("traces.csv", cfg.seed, body)];
    Ok(Output { rows, files, handoff: Handoff::Nothing })
}

fn decompose_task(cfg: &RunConfig, src: &Source, regions: &RegionDecomposition) -> Result<Output> {
    let finish = |decs: Vec<CylinderDecomposition>, window: Option<(f64, f64)>| -> Result<Output> {
        let closed: Vec<(i8, f64)> =
            decs.iter().flat_map(|d| d.closed_curves.iter().map(move |c| (d.family, c.t))).collect();
        let unresolved = decs.iter().any(|d| d.unresolved);
        let rows = vec![Row::new(
            "decompose",
            format!("closed asymptotic curves = {}", closed.len()),
            Status::from_bool(!unresolved),
        )];
        #[derive(Serialize)]
        struct Cylinders {
            window: Option<(f64, f64)>,
            families: Vec<CylinderDecomposition>,
        }
        let files = vec![json(Task::Decompose, cfg.seed, Cylinders { window, families: decs })?];
        Ok(Output { rows, files, handoff: Handoff::ClosedCurves(closed) })
    };
    let annular = Annular::of(src)?;
    let window = match cfg.decompose.t_range {
        Some(r) => Some(r),
        None if regions.negative_area == 0.0 && matches!(src, Source::Surface(_)) => None,
        None => annular.band()?,
    };
    let Some(window) = window else {
        return finish(Vec::new(), None);
    };
    let x0 = annular.forms().domain().u.min;
    let controls = DecompositionControls { samples: cfg.decompose.samples, ..DecompositionControls::default() };
    let decs = [1i8, -1]
        .par_iter()
        .map(|&f| cylinder_decomposition(annular.forms(), x0, f, window, &controls))
        .collect::<Result<Vec<_>>>()?;
    finish(decs, Some(window))
}

fn invariant_task(cfg: &RunConfig, src: &Source, closed: &[(i8, f64)]) -> Result<Output> {
    let annular = Annular::of(src)?;
    let mut lines: Vec<(i8, f64)> = closed.to_vec();
    if let (Some(t0), Source::Forms(_)) = (cfg.invariant.t0, src) {
        if !lines.iter().any(|&(_, t)| (t - t0).abs() < 1e-8) {
            lines.push((0, t0));
        }
    }
    #[derive(Serialize)]
    struct Entry {
        family: i8,
        t: f64,
        invariant: RigidityInvariant,
    }
    let mut entries = Vec::new();
    for &(family, t) in &lines {
        let inv = match &annular {
            Annular::Forms(f) => rigidity_invariant_line(*f, t, cfg.invariant.samples)?,
            Annular::Swapped(s) => {
                let x0 = s.domain().u.min;
                let controls = TraceControls { max_length: 1e3, ..TraceControls::default() };
                let curve = trace(s, ParamPoint::new(x0, t), if family == 0 { 1 } else { family }, &controls)?;
                rigidity_invariant_curve(s, &curve)?
            }
        };
        entries.push(Entry { family, t, invariant: inv });
    }
    let tol = cfg.invariant.tolerance;
    let mut rows = Vec::new();
    if entries.is_empty() {
        rows.push(Row::new("invariant", "closed curves = 0".into(), Status::Pass));
    }
    for e in &entries {
        let inv = &e.invariant;
        let row = match (inv.coordinate, inv.discrepancy) {
            (Some(c), Some(d)) => Row::new(
                "invariant",
                format!("t = {:.4}: coordinate = {c:.8}, intrinsic = {:.8}, discrepancy = {d:.1e}", e.t, inv.intrinsic),
                Status::from_bool(d < tol),
            )
            .target(format!("tol {tol:e}")),
            _ => Row::new(
                "invariant",
                format!("t = {:.4}: intrinsic = {:.8}", e.t, inv.intrinsic),
                Status::from_bool(inv.intrinsic.is_finite()),
            ),
        };
        rows.push(row);
    }
    let files = vec![json(Task::Invariant, cfg.seed, &entries)?];
    Ok(Output { rows, files, handoff: Handoff::Nothing })
}

/// Field, Cauchy data line `(t0, (x_lo, x_hi))`, and the default symmetrizer.
fn codazzi_field(cfg: &RunConfig, src: &Source) -> Result<(SystemField, f64, (f64, f64), Option<SymmetrizerKind>)> {
    let c = &cfg.codazzi;
    match c.field {
        FieldChoice::Collar => {
            let f = collar_model(FieldGrid::bounded((-1.0, 1.0), c.nx, (0.0, 1.0), c.nt))?;
            Ok((f, 0.25, (-0.5, 0.5), Some(SymmetrizerKind::Boundary)))
        }
        FieldChoice::Wave => {
            let f = wave_field(FieldGrid::bounded((-1.0, 1.0), c.nx, (0.0, 1.0), c.nt))?;
            Ok((f, 0.0, (-0.5, 0.5), None))
        }
        FieldChoice::Source => {
            let annular = Annular::of(src)?;
            let d: Domain = annular.forms().domain();
            let (lo, hi) = match c.t_range {
                Some(r) => r,
                None => {
                    let (a, b) = annular.band()?.ok_or_else(|| Error::Precondition("source has no region with K < 0".into()))?;
                    let m = 0.05f64.min(0.25 * (b - a));
                    match annular {
                        Annular::Forms(_) => (a.max(0.0), b),
                        Annular::Swapped(_) => (a + m, b - m),
                    }
                }
            };
            let grid = if d.u.periodic {
                FieldGrid::periodic((d.u.min, d.u.max), c.nx, (lo, hi), c.nt)
            } else {
                FieldGrid::bounded((d.u.min, d.u.max), c.nx, (lo, hi), c.nt)
            };
            let name = match src {
                Source::Surface(s) => format!("{} (swapped)", s.family.name()),
                Source::Forms(f) => f.name.clone(),
            };
            let field = SystemField::from_source(annular.forms(), name, grid)?;
            let third = (d.u.max - d.u.min) / 3.0;
            let kind = match src {
                Source::Forms(_) => Some(SymmetrizerKind::ClosedCurveF),
                Source::Surface(_) => None,
            };
            Ok((field, lo + 0.25 * (hi - lo), (d.u.min + third, d.u.max - third), kind))
        }
    }
}

fn codazzi_task(cfg: &RunConfig, src: &Source) -> Result<Output> {
    let c = &cfg.codazzi;
    let (field, t0, span, default_kind) = codazzi_field(cfg, src)?;
    let controls = SolveControls { coupling: Coupling::Quasilinear, ..SolveControls::default() };
    let mut rows = Vec::new();

    let cauchy = solve(&field, &DataSpec::Cauchy { t0, x: span, n: c.n, data: Box::new(|_| [0.0; 2]) }, &controls)?;
    // arms along both characteristics from the middle of the data line, kept
    // inside the upper half of the field
    let corner = [0.5 * (span.0 + span.1), t0];
    let arm = (c.n / 4).max(1);
    let [_, _, _, l, m, n] = field.eval(corner[0], corner[1])?.forms;
    let disc = (m * m - l * n).max(0.0).sqrt();
    let speed = [(-m + disc) / n, (-m - disc) / n].map(f64::abs).into_iter().fold(1.0, f64::max);
    let top = field.grid.t(field.grid.nt - 1);
    let h = ((span.1 - span.0) / c.n as f64).min(0.5 * (top - t0) / (arm as f64 * speed));
    let goursat = DataSpec::Goursat {
        corner,
        h,
        n_right: arm,
        n_left: arm,
        right: Box::new(|_| [0.0; 2]),
        left: Box::new(|_| [0.0; 2]),
    };
    let goursat = solve(&field, &goursat, &controls)?;
    let max_u = cauchy.max_abs_u.max(goursat.max_abs_u);
    rows.push(Row::new("uniqueness", format!("max|U| = {max_u:.1e}"), Status::from_bool(max_u < c.tolerance)));

    #[derive(Serialize)]
    struct Uniqueness {
        cauchy_points: usize,
        goursat_points: usize,
        max_abs_u: f64,
        stopped: [Option<String>; 2],
    }
    #[derive(Serialize)]
    struct Report {
        field: String,
        data_line: (f64, (f64, f64)),
        uniqueness: Uniqueness,
        symmetrizer: Option<serde_json::Value>,
        energy: Vec<tightsurf::codazzi::EnergyLedger>,
    }
    let mut report = Report {
        field: field.provenance.clone(),
        data_line: (t0, span),
        uniqueness: Uniqueness {
            cauchy_points: cauchy.points.iter().map(Vec::len).sum(),
            goursat_points: goursat.points.iter().map(Vec::len).sum(),
            max_abs_u: max_u,
            stopped: [cauchy.stopped.clone(), goursat.stopped.clone()],
        },
        symmetrizer: None,
        energy: Vec::new(),
    };
    let mut solution_csv = cauchy.to_csv();

    let kind = c.symmetrizer.unwrap_or(default_kind);
    if let Some(kind) = kind {
        let search = SearchControls {
            lambda_bar_start: c.lambda_bar_start,
            doublings: c.doublings,
            ..SearchControls::default()
        };
        match build_symmetrizer(&field, kind, &search) {
            Ok(symm) => {
                rows.push(Row::new(
                    "symmetrizer",
                    format!("min-eig = {:.1e}", symm.report.min_eig),
                    Status::from_bool(symm.report.passed),
                ));
                let q = symm.report.q;
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                let n_pert = if kind == SymmetrizerKind::Boundary { c.perturbations } else { 0 };
                let mut margins = Vec::new();
                for k in 0..n_pert {
                    let a: Vec<f64> = (0..6).map(|_| rng.gen_range(-c.amplitude..c.amplitude)).collect();
                    let (x0, len) = (span.0, span.1 - span.0);
                    let data = DataSpec::Cauchy {
                        t0,
                        x: span,
                        n: c.n,
                        data: Box::new(move |x| {
                            let s = PI * (x - x0) / len;
                            [a[0] * s.sin() + a[1] * (2.0 * s).sin() + a[2] * (3.0 * s).cos(), a[3] * s.cos() + a[4] * (2.0 * s).sin() + a[5]]
                        }),
                    };
                    let sol = solve(&field, &data, &controls)?;
                    let w = WeightedNorm { q, exponent: symm.report.exponent, t_ref: field.grid.t0 };
                    let ledger = energy_audit(&field, &symm, &sol, Some(w), 10.0, 1e-9)?;
                    margins.push((ledger.margin.unwrap_or(f64::NEG_INFINITY), ledger.passed));
                    if k == 0 {
                        solution_csv = sol.to_csv();
                    }
                    report.energy.push(ledger);
                }
                if !margins.is_empty() {
                    let min = margins.iter().map(|m| m.0).fold(f64::INFINITY, f64::min);
                    let ok = margins.iter().all(|&(m, p)| m > 0.0 && p);
                    rows.push(Row::new("energy", format!("min margin = {min:.1e} over {} runs", margins.len()), Status::from_bool(ok)));
                }
                report.symmetrizer = Some(serde_json::to_value(&symm).map_err(|e| Error::Io(e.to_string()))?);
            }
            Err(Error::SearchExhausted { x, t, eigenvalue }) => {
                rows.push(Row::new("symmetrizer", format!("min-eig = {eigenvalue:.1e}"), Status::Fail));
                report.symmetrizer = Some(serde_json::json!({ "kind": kind, "exhausted_at": [x, t], "min_eig": eigenvalue }));
            }
            Err(e) => {
                rows.push(Row::new("symmetrizer", e.to_string(), Status::Fail));
                report.symmetrizer = Some(serde_json::json!({ "kind": kind, "error": e.to_string() }));
            }
        }
    }
    let files = vec![json(Task::Codazzi, cfg.seed, &report)?, csv("codazzi_solution.csv", cfg.seed, solution_csv)];
    Ok(Output { rows, files, handoff: Handoff::Nothing })
}

fn chart_task(cfg: &RunConfig, src: &Source) -> Result<Output> {
    let s = src.forms();
    let c = &cfg.chart;
    let kind = c.kind.unwrap_or(match src {
        Source::Surface(_) => ChartChoice::MZero,
        Source::Forms(_) => ChartChoice::Adapted,
    });
    let chart = match kind {
        ChartChoice::Adapted => asymptotic_adapted_chart(s, &AdaptedSpec::default())?,
        ChartChoice::MZero => {
            let guess = match c.guess {
                Some(g) => g,
                None => {
                    let d = s.domain();
                    negative_run(&Swapped(src_surface(src)?), d.v.min, d.u)?
                        .ok_or_else(|| Error::Precondition("no parabolic level to follow".into()))?
                        .0
                }
            };
            let spec = StripSpec { center: c.center, half_length: c.half_length, width: c.width, ..StripSpec::default() };
            m_zero_chart(s, BaseCurve::ParabolicLevel { along: Along::V, guess }, &spec)?
        }
    };
    let cert = chart_certificate(s, &chart, c.tolerance)?;
    let rows = vec![Row::new(
        "chart",
        format!("{kind:?} jacobian error = {:.1e}, forms mismatch = {:.1e}", cert.jacobian_error, cert.forms_mismatch),
        Status::from_bool(cert.passed),
    )];
    #[derive(Serialize)]
    struct ChartReport<'a> {
        kind: &'a tightsurf::charts::ChartKind,
        nx: usize,
        nt: usize,
        x_period: Option<f64>,
        level_sigma: &'a [f64],
        certificate: &'a tightsurf::charts::ChartCertificate,
    }
    let files = vec![
        json(
            Task::Chart,
            cfg.seed,
            ChartReport {
                kind: &chart.kind,
                nx: chart.nx(),
                nt: chart.nt(),
                x_period: chart.x_period,
                level_sigma: &chart.level_sigma,
                certificate: &cert,
            },
        )?,
        csv("chart.csv", cfg.seed, chart.to_csv()),
    ];
    Ok(Output { rows, files, handoff: Handoff::Nothing })
}

fn src_surface(src: &Source) -> Result<Surface> {
    match src {
        Source::Surface(s) => Ok(s.clone()),
        Source::Forms(_) => Err(Error::Precondition("M-zero charts need a parametric surface".into())),
    }
}

fn run_task(task: Task, cfg: &RunConfig, src: &Source, done: &BTreeMap<Task, Handoff>) -> Result<Output> {
    match task {
        Task::Analyze => analyze(cfg, src),
        Task::Trace | Task::Decompose => {
            let Some(Handoff::Regions(regions)) = done.get(&Task::Analyze) else {
                return Err(Error::Precondition("region decomposition missing".into()));
            };
            if task == Task::Trace {
                trace_task(cfg, src, regions)
            } else {
                decompose_task(cfg, src, regions)
            }
        }
        Task::Invariant => {
            let Some(Handoff::ClosedCurves(closed)) = done.get(&Task::Decompose) else {
                return Err(Error::Precondition("closed curve list missing".into()));
            };
            invariant_task(cfg, src, closed)
        }
        Task::Codazzi => codazzi_task(cfg, src),
        Task::Chart => chart_task(cfg, src),
    }
}

fn write_artifact(dir: &Path, name: &str, bytes: &[u8]) -> Result<ArtifactEntry> {
    fs::write(dir.join(name), bytes)?;
    Ok(ArtifactEntry { path: name.to_string(), sha256: format!("{:x}", Sha256::digest(bytes)), bytes: bytes.len() })
}

/// Runs the tasks of `cfg` with their prerequisites. Independent tasks run
/// in parallel; a failed task only fails the tasks that depend on it. The
/// manifest is written to `manifest.json` in the output directory.
pub fn run_pipeline(cfg: &RunConfig) -> Result<Manifest> {
    let tasks = schedule(&cfg.tasks);
    let src = cfg.build_source()?;
    fs::create_dir_all(&cfg.out)?;

    let mut records: BTreeMap<Task, TaskRecord> = BTreeMap::new();
    let mut done: BTreeMap<Task, Handoff> = BTreeMap::new();
    let mut pending = tasks.clone();
    while !pending.is_empty() {
        let (ready, rest): (Vec<Task>, Vec<Task>) = pending
            .iter()
            .partition(|t| t.prerequisites().iter().all(|p| records.contains_key(p) || !tasks.contains(p)));
        pending = rest;
        let results: Vec<(Task, Result<Output>)> = ready
            .par_iter()
            .map(|&t| {
                let failed = t.prerequisites().iter().find(|p| records.get(p).map_or(true, |r| r.status == Status::Fail));
                match failed {
                    Some(p) => (t, Err(Error::Precondition(format!("prerequisite `{}` failed", p.name())))),
                    None => (t, run_task(t, cfg, &src, &done)),
                }
            })
            .collect();
        // single writer: artifacts land in schedule order
        for (task, result) in results {
            let record = match result {
                Ok(out) => {
                    let artifacts = out
                        .files
                        .iter()
                        .map(|(name, bytes)| write_artifact(&cfg.out, name, bytes))
                        .collect::<Result<Vec<_>>>()?;
                    let status = if out.rows.iter().any(|r| r.status == Status::Fail) { Status::Fail } else { Status::Pass };
                    done.insert(task, out.handoff);
                    TaskRecord { task, status, rows: out.rows, error: None, artifacts }
                }
                Err(e) => TaskRecord {
                    task,
                    status: Status::Fail,
                    rows: vec![Row::new(task.name(), e.to_string(), Status::Fail)],
                    error: Some(e.to_string()),
                    artifacts: Vec::new(),
                },
            };
            records.insert(task, record);
        }
    }
    let manifest = Manifest {
        seed: cfg.seed,
        source: serde_json::to_string(&cfg.source).map_err(|e| Error::Io(e.to_string()))?,
        tasks: tasks.iter().filter_map(|t| records.remove(t)).collect(),
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    bytes.push(b'\n');
    fs::write(cfg.out.join("manifest.json"), bytes)?;
    Ok(manifest)
}
