//! Line-oriented run configuration: `key = value` pairs, optional `[section]`
//! headers, `#` comments. A dotted key (`quadrature.n = 256`) names its
//! section and may appear anywhere.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;
use tightsurf::codazzi::SymmetrizerKind;
use tightsurf::grid::SampledGrid;
use tightsurf::prescribed::PrescribedForms;
use tightsurf::surface::Orientation;
use tightsurf::{Error, FormSource, Result, Surface};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Analyze,
    Trace,
    Decompose,
    Invariant,
    Codazzi,
    Chart,
}

impl Task {
    pub const ALL: [Task; 6] = [Task::Analyze, Task::Trace, Task::Decompose, Task::Invariant, Task::Codazzi, Task::Chart];

    pub fn name(self) -> &'static str {
        match self {
            Task::Analyze => "analyze",
            Task::Trace => "trace",
            Task::Decompose => "decompose",
            Task::Invariant => "invariant",
            Task::Codazzi => "codazzi",
            Task::Chart => "chart",
        }
    }

    pub fn parse(name: &str) -> Option<Task> {
        Task::ALL.into_iter().find(|t| t.name() == name)
    }

    /// Tasks whose results this one consumes.
    pub fn prerequisites(self) -> &'static [Task] {
        match self {
            Task::Trace | Task::Decompose => &[Task::Analyze],
            Task::Invariant => &[Task::Decompose],
            _ => &[],
        }
    }
}

/// Closes `tasks` under prerequisites, each task once, dependencies first.
pub fn schedule(tasks: &[Task]) -> Vec<Task> {
    fn visit(t: Task, out: &mut Vec<Task>) {
        if out.contains(&t) {
            return;
        }
        for &p in t.prerequisites() {
            visit(p, out);
        }
        out.push(t);
    }
    let mut out = Vec::new();
    for &t in tasks {
        visit(t, &mut out);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnulusVariant {
    Plain,
    Rotated,
    Mirrored,
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum SourceSpec {
    Sphere { radius: f64 },
    Torus { axis_radius: f64, tube_radius: f64 },
    PerturbedTorus { axis_radius: f64, tube_radius: f64, amplitude: f64, freq_u: i32, freq_v: i32 },
    CubicCollar { axis_radius: f64, half_width: f64 },
    Graph { a: f64, b: f64, c: f64, half_width: f64 },
    Grid { file: PathBuf },
    Annulus { variant: AnnulusVariant, delta: f64 },
}

/// A surface or a chart of prescribed forms.
#[derive(Debug, Clone)]
pub enum Source {
    Surface(Surface),
    Forms(PrescribedForms),
}

impl Source {
    pub fn forms(&self) -> &dyn FormSource {
        match self {
            Source::Surface(s) => s,
            Source::Forms(f) => f,
        }
    }
}

impl SourceSpec {
    pub fn build(&self, flipped: bool) -> Result<Source> {
        let orientation = if flipped { Orientation::Flipped } else { Orientation::Standard };
        let surface = |s: Surface| Ok(Source::Surface(s.with_orientation(orientation)));
        match *self {
            SourceSpec::Sphere { radius } => surface(Surface::sphere(radius)?),
            SourceSpec::Torus { axis_radius, tube_radius } => surface(Surface::torus(axis_radius, tube_radius)?),
            SourceSpec::PerturbedTorus { axis_radius, tube_radius, amplitude, freq_u, freq_v } => {
                surface(Surface::perturbed_torus(axis_radius, tube_radius, amplitude, freq_u, freq_v)?)
            }
            SourceSpec::CubicCollar { axis_radius, half_width } => surface(Surface::cubic_collar(axis_radius, half_width)?),
            SourceSpec::Graph { a, b, c, half_width } => surface(Surface::graph(a, b, c, half_width)?),
            SourceSpec::Grid { ref file } => surface(Surface::sampled(SampledGrid::load(file)?)),
            SourceSpec::Annulus { variant, delta } => {
                let f = match variant {
                    AnnulusVariant::Plain => PrescribedForms::annulus(delta),
                    AnnulusVariant::Rotated => PrescribedForms::annulus(delta).rotated(),
                    AnnulusVariant::Mirrored => PrescribedForms::annulus(delta).rotated().mirrored(),
                    AnnulusVariant::Flat => PrescribedForms::flat_annulus(),
                };
                Ok(Source::Forms(if flipped { f.mirrored() } else { f }))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldChoice {
    /// The chart of the configured source.
    Source,
    /// `N = 1`, `M = 0`, `L = -t`.
    Collar,
    /// `L = -1`, `M = 0`, `N = 1`.
    Wave,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChartChoice {
    MZero,
    Adapted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureTask {
    pub n: usize,
    pub tolerance: f64,
    /// Lattice size of the region decomposition.
    pub regions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceTask {
    /// Start points per parabolic curve.
    pub starts: usize,
    pub max_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecomposeTask {
    pub samples: usize,
    pub t_range: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantTask {
    /// Extra coordinate line to evaluate on prescribed forms.
    pub t0: Option<f64>,
    pub samples: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodazziTask {
    pub field: FieldChoice,
    /// `None` picks a kind suited to the field; `Some(None)` skips the search.
    pub symmetrizer: Option<Option<SymmetrizerKind>>,
    pub nx: usize,
    pub nt: usize,
    /// Data intervals along the initial curve.
    pub n: usize,
    pub t_range: Option<(f64, f64)>,
    pub perturbations: usize,
    pub amplitude: f64,
    pub lambda_bar_start: f64,
    pub doublings: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartTask {
    pub kind: Option<ChartChoice>,
    /// Guess for the parabolic level followed by an M-zero chart.
    pub guess: Option<f64>,
    pub center: f64,
    pub half_length: f64,
    pub width: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub source: SourceSpec,
    pub flipped: bool,
    pub tasks: Vec<Task>,
    pub out: PathBuf,
    pub seed: u64,
    pub quadrature: QuadratureTask,
    pub trace: TraceTask,
    pub decompose: DecomposeTask,
    pub invariant: InvariantTask,
    pub codazzi: CodazziTask,
    pub chart: ChartTask,
}

impl RunConfig {
    fn defaults(source: SourceSpec) -> Self {
        Self {
            source,
            flipped: false,
            tasks: Task::ALL.to_vec(),
            out: PathBuf::from("tightsurf-out"),
            seed: 0,
            quadrature: QuadratureTask { n: 512, tolerance: 1e-6, regions: 256 },
            trace: TraceTask { starts: 4, max_length: 50.0 },
            decompose: DecomposeTask { samples: 64, t_range: None },
            invariant: InvariantTask { t0: None, samples: 2048, tolerance: 1e-6 },
            codazzi: CodazziTask {
                field: FieldChoice::Source,
                symmetrizer: None,
                nx: 65,
                nt: 33,
                n: 64,
                t_range: None,
                perturbations: 20,
                amplitude: 1e-3,
                lambda_bar_start: 0.125,
                doublings: 40,
                tolerance: 1e-12,
            },
            chart: ChartTask { kind: None, guess: None, center: 0.0, half_length: 0.5, width: 0.2, tolerance: 1e-5 },
        }
    }

    /// Applies a tolerance override to every task.
    pub fn override_tolerance(&mut self, tol: f64) {
        self.quadrature.tolerance = tol;
        self.invariant.tolerance = tol;
        self.codazzi.tolerance = tol;
        self.chart.tolerance = tol;
    }

    pub fn build_source(&self) -> Result<Source> {
        self.source.build(self.flipped)
    }
}

const SURFACE_KEYS: [&str; 14] = [
    "family",
    "orientation",
    "radius",
    "axis_radius",
    "tube_radius",
    "amplitude",
    "freq_u",
    "freq_v",
    "half_width",
    "a",
    "b",
    "c",
    "file",
    "delta",
];

const KEYS: [&str; 33] = [
    "seed",
    "out",
    "tolerance",
    "tasks.list",
    "quadrature.n",
    "quadrature.tolerance",
    "quadrature.regions",
    "trace.starts",
    "trace.max_length",
    "decompose.samples",
    "decompose.t_min",
    "decompose.t_max",
    "invariant.t0",
    "invariant.samples",
    "invariant.tolerance",
    "codazzi.field",
    "codazzi.symmetrizer",
    "codazzi.nx",
    "codazzi.nt",
    "codazzi.n",
    "codazzi.t_min",
    "codazzi.t_max",
    "codazzi.perturbations",
    "codazzi.amplitude",
    "codazzi.lambda_bar_start",
    "codazzi.doublings",
    "codazzi.tolerance",
    "chart.kind",
    "chart.guess",
    "chart.center",
    "chart.half_length",
    "chart.width",
    "chart.tolerance",
];

fn known_keys() -> impl Iterator<Item = String> {
    KEYS.iter().map(|k| k.to_string()).chain(SURFACE_KEYS.iter().map(|k| format!("surface.{k}")))
}

fn config_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config { line, message: message.into() }
}

fn unknown_key(key: &str, line: usize) -> Error {
    let best = known_keys()
        .map(|k| (strsim::levenshtein(key, &k), k))
        .min_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    match best {
        Some((d, k)) if d <= 3 => config_err(line, format!("unknown key `{key}` (did you mean `{k}`?)")),
        _ => config_err(line, format!("unknown key `{key}`")),
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

impl Entry {
    fn parse<T: std::str::FromStr>(&self, what: &str) -> Result<T> {
        self.value.parse().map_err(|_| config_err(self.line, format!("expected {what}, found `{}`", self.value)))
    }

    fn float(&self) -> Result<f64> {
        let x: f64 = self.parse("a number")?;
        if !x.is_finite() {
            return Err(config_err(self.line, "value must be finite"));
        }
        Ok(x)
    }

    fn count(&self) -> Result<usize> {
        self.parse("a non-negative integer")
    }

    fn positive(&self) -> Result<f64> {
        let x = self.float()?;
        if x <= 0.0 {
            return Err(config_err(self.line, "value must be positive"));
        }
        Ok(x)
    }
}

fn tokenize(text: &str) -> Result<BTreeMap<String, Entry>> {
    let mut section: Option<String> = None;
    let mut entries = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .map(str::trim)
                .filter(|n| !n.is_empty() && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-'))
                .ok_or_else(|| config_err(line, format!("malformed section header `{body}`")))?;
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| config_err(line, format!("expected `key = value`, found `{body}`")))?;
        let key = key.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(config_err(line, format!("malformed key `{key}`")));
        }
        // dotted keys name their section themselves
        let full = match &section {
            Some(s) if !key.contains('.') => format!("{s}.{key}"),
            _ => key.to_string(),
        };
        if !known_keys().any(|k| k == full) {
            return Err(unknown_key(&full, line));
        }
        let value = value.trim().trim_matches('"').to_string();
        if let Some(prev) = entries.insert(full.clone(), Entry { value, line }) {
            return Err(config_err(line, format!("duplicate key `{full}` (first set on line {})", prev.line)));
        }
    }
    Ok(entries)
}

fn source_spec(entries: &BTreeMap<String, Entry>) -> Result<(SourceSpec, bool)> {
    let get = |k: &str| entries.get(&format!("surface.{k}"));
    let family = get("family").ok_or_else(|| config_err(0, "missing `surface.family`"))?;
    let f = |k: &str, default: f64| get(k).map_or(Ok(default), Entry::float);
    let i = |k: &str, default: i32| get(k).map_or(Ok(default), |e| e.parse::<i32>("an integer"));
    let (spec, used): (SourceSpec, &[&str]) = match family.value.as_str() {
        "sphere" => (SourceSpec::Sphere { radius: f("radius", 1.0)? }, &["radius"]),
        "torus" => (
            SourceSpec::Torus { axis_radius: f("axis_radius", 2.0)?, tube_radius: f("tube_radius", 1.0)? },
            &["axis_radius", "tube_radius"],
        ),
        "perturbed-torus" => (
            SourceSpec::PerturbedTorus {
                axis_radius: f("axis_radius", 2.0)?,
                tube_radius: f("tube_radius", 1.0)?,
                amplitude: f("amplitude", 0.05)?,
                freq_u: i("freq_u", 2)?,
                freq_v: i("freq_v", 1)?,
            },
            &["axis_radius", "tube_radius", "amplitude", "freq_u", "freq_v"],
        ),
        "cubic-collar" => (
            SourceSpec::CubicCollar { axis_radius: f("axis_radius", 2.0)?, half_width: f("half_width", 0.3)? },
            &["axis_radius", "half_width"],
        ),
        "graph" | "plane" => {
            let plane = family.value == "plane";
            let coeff = |k: &str| if plane { Ok(0.0) } else { f(k, 0.0) };
            (
                SourceSpec::Graph { a: coeff("a")?, b: coeff("b")?, c: coeff("c")?, half_width: f("half_width", 1.0)? },
                if plane { &["half_width"] } else { &["a", "b", "c", "half_width"] },
            )
        }
        "grid" => {
            let file = get("file").ok_or_else(|| config_err(family.line, "family `grid` needs `file`"))?;
            (SourceSpec::Grid { file: PathBuf::from(&file.value) }, &["file"])
        }
        name @ ("annulus" | "rotated-annulus" | "mirrored-annulus" | "flat-annulus") => {
            let variant = match name {
                "annulus" => AnnulusVariant::Plain,
                "rotated-annulus" => AnnulusVariant::Rotated,
                "mirrored-annulus" => AnnulusVariant::Mirrored,
                _ => AnnulusVariant::Flat,
            };
            (SourceSpec::Annulus { variant, delta: f("delta", 0.1)? }, &["delta"])
        }
        other => return Err(config_err(family.line, format!("unknown surface family `{other}`"))),
    };
    for k in SURFACE_KEYS.iter().skip(2) {
        if let Some(e) = get(k) {
            if !used.contains(k) {
                return Err(config_err(e.line, format!("key `{k}` does not apply to family `{}`", family.value)));
            }
        }
    }
    let flipped = match get("orientation").map(|e| (e.value.as_str(), e.line)) {
        None | Some(("standard", _)) => false,
        Some(("flipped", _)) => true,
        Some((other, line)) => return Err(config_err(line, format!("orientation must be `standard` or `flipped`, found `{other}`"))),
    };
    Ok((spec, flipped))
}

fn range(entries: &BTreeMap<String, Entry>, section: &str) -> Result<Option<(f64, f64)>> {
    let lo = entries.get(&format!("{section}.t_min"));
    let hi = entries.get(&format!("{section}.t_max"));
    match (lo, hi) {
        (None, None) => Ok(None),
        (Some(a), Some(b)) => {
            let (x, y) = (a.float()?, b.float()?);
            if x >= y {
                return Err(config_err(b.line, format!("`{section}.t_max` must exceed `{section}.t_min`")));
            }
            Ok(Some((x, y)))
        }
        (Some(e), None) | (None, Some(e)) => Err(config_err(e.line, format!("`{section}.t_min` and `{section}.t_max` go together"))),
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let entries = tokenize(text)?;
    let (source, flipped) = source_spec(&entries)?;
    let mut cfg = RunConfig::defaults(source);
    cfg.flipped = flipped;

    for (key, e) in &entries {
        match key.as_str() {
            "seed" => cfg.seed = e.parse("a non-negative integer")?,
            "out" => cfg.out = PathBuf::from(&e.value),
            "tasks.list" => {
                cfg.tasks = e
                    .value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| Task::parse(s).ok_or_else(|| config_err(e.line, format!("unknown task `{s}`"))))
                    .collect::<Result<_>>()?
            }
            "quadrature.n" => cfg.quadrature.n = e.count()?,
            "quadrature.tolerance" => cfg.quadrature.tolerance = e.positive()?,
            "quadrature.regions" => cfg.quadrature.regions = e.count()?,
            "trace.starts" => cfg.trace.starts = e.count()?,
            "trace.max_length" => cfg.trace.max_length = e.positive()?,
            "decompose.samples" => cfg.decompose.samples = e.count()?,
            "invariant.t0" => cfg.invariant.t0 = Some(e.float()?),
            "invariant.samples" => cfg.invariant.samples = e.count()?,
            "invariant.tolerance" => cfg.invariant.tolerance = e.positive()?,
            "codazzi.field" => {
                cfg.codazzi.field = match e.value.as_str() {
                    "source" => FieldChoice::Source,
                    "collar" => FieldChoice::Collar,
                    "wave" => FieldChoice::Wave,
                    other => return Err(config_err(e.line, format!("unknown field `{other}`"))),
                }
            }
            "codazzi.symmetrizer" => {
                cfg.codazzi.symmetrizer = Some(match e.value.as_str() {
                    "none" => None,
                    "boundary" => Some(SymmetrizerKind::Boundary),
                    "closed-curve" => Some(SymmetrizerKind::ClosedCurve),
                    "closed-curve-f" => Some(SymmetrizerKind::ClosedCurveF),
                    other => return Err(config_err(e.line, format!("unknown symmetrizer `{other}`"))),
                })
            }
            "codazzi.nx" => cfg.codazzi.nx = e.count()?,
            "codazzi.nt" => cfg.codazzi.nt = e.count()?,
            "codazzi.n" => cfg.codazzi.n = e.count()?,
            "codazzi.perturbations" => cfg.codazzi.perturbations = e.count()?,
            "codazzi.amplitude" => cfg.codazzi.amplitude = e.positive()?,
            "codazzi.lambda_bar_start" => cfg.codazzi.lambda_bar_start = e.float()?,
            "codazzi.doublings" => cfg.codazzi.doublings = e.count()?,
            "codazzi.tolerance" => cfg.codazzi.tolerance = e.positive()?,
            "chart.kind" => {
                cfg.chart.kind = Some(match e.value.as_str() {
                    "m-zero" => ChartChoice::MZero,
                    "adapted" => ChartChoice::Adapted,
                    other => return Err(config_err(e.line, format!("unknown chart kind `{other}`"))),
                })
            }
            "chart.guess" => cfg.chart.guess = Some(e.float()?),
            "chart.center" => cfg.chart.center = e.float()?,
            "chart.half_length" => cfg.chart.half_length = e.positive()?,
            "chart.width" => cfg.chart.width = e.positive()?,
            "chart.tolerance" => cfg.chart.tolerance = e.positive()?,
            _ => {}
        }
    }
    cfg.decompose.t_range = range(&entries, "decompose")?;
    cfg.codazzi.t_range = range(&entries, "codazzi")?;
    if let Some(e) = entries.get("tolerance") {
        cfg.override_tolerance(e.positive()?);
    }
    for (key, min) in [("quadrature.n", 16), ("quadrature.regions", 16), ("codazzi.nx", 8), ("codazzi.nt", 8), ("codazzi.n", 4)] {
        if let Some(e) = entries.get(key) {
            if e.count()? < min {
                return Err(config_err(e.line, format!("`{key}` must be at least {min}")));
            }
        }
    }

    // surface invariants are checked by building the source once
    if let Err(err) = cfg.build_source() {
        let line = entries.get("surface.family").map_or(0, |e| e.line);
        let message = match err {
            Error::InvalidSurface(m) => m,
            other => other.to_string(),
        };
        return Err(config_err(line, message));
    }
    Ok(cfg)
}
