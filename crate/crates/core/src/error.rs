use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point ({u}, {v}) lies outside the surface domain")]
    OutsideDomain { u: f64, v: f64 },

    #[error("sampled grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("degenerate metric (det I = {det}) at ({u}, {v}); sample is not immersed")]
    DegenerateMetric { u: f64, v: f64, det: f64 },

    #[error("invalid surface: {0}")]
    InvalidSurface(String),

    #[error("second fundamental form vanishes identically at ({u}, {v}); asymptotic field undefined")]
    UndefinedField { u: f64, v: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("quadrature did not converge: estimate {estimate:e} above tolerance {tolerance:e}")]
    NonConvergence { estimate: f64, tolerance: f64 },

    #[error("trace budget exhausted after {steps} steps without classification")]
    BudgetExhausted { steps: usize },

    #[error("no return to the transversal within budget")]
    NoReturn,

    #[error("chart construction failed: {0}")]
    Chart(String),

    #[error("certificate mismatch in field `{field}`: stored {stored:e}, recomputed {recomputed:e}")]
    CertificateMismatch {
        field: String,
        stored: f64,
        recomputed: f64,
    },

    #[error("denominator N + w = {value:e} below threshold {threshold:e} at ({x}, {t})")]
    Threshold {
        x: f64,
        t: f64,
        value: f64,
        threshold: f64,
    },

    #[error("symmetrizer search exhausted: min eigenvalue {eigenvalue:e} at ({x}, {t})")]
    SearchExhausted { x: f64, t: f64, eigenvalue: f64 },

    #[error("characteristic grid collapse: {0}")]
    GridCollapse(String),

    #[error("energy identity residual {residual:e} above bound {bound:e}")]
    IdentityResidual { residual: f64, bound: f64 },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
