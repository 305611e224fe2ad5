use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value in {what} at cell {index}")]
    NonFinite { what: String, index: usize },

    #[error("source has nonzero mean {mean:.3e} (tolerance {tol:.1e})")]
    NonzeroMean { mean: f64, tol: f64 },

    #[error("stability rule violated: {0}")]
    Stability(String),

    #[error("solver produced non-finite values at step {step} (t = {t:.6})")]
    Blowup { step: usize, t: f64 },

    #[error("shock monitor tripped at t = {t:.6}, cell {cell:?}: max|grad u|*dx = {value:.3e} > {threshold:.3e}")]
    Shock {
        t: f64,
        cell: [usize; 3],
        value: f64,
        threshold: f64,
    },

    #[error("negative density {min:.3e} below roundoff bound")]
    NegativeDensity { min: f64 },

    #[error("insufficient snapshots: need at least {need}, got {got}")]
    InsufficientSnapshots { need: usize, got: usize },

    #[error("snapshots are not uniformly spaced in time")]
    NonUniformStride,

    #[error("time mismatch: {0}")]
    TimeMismatch(String),

    #[error("all cells are below the density floor")]
    AllMasked,

    #[error("field is not a gradient: max|curl| = {0:.3e}")]
    NotGradient(f64),

    #[error("wavevector snapping moved k by {shift:.3e} on axis {axis} (tolerance {tol:.1e})")]
    SnapTolerance { axis: usize, shift: f64, tol: f64 },

    #[error("vector field is not acceptable: {0}")]
    NotAcceptable(String),

    #[error("test function '{0}' lacks momentum derivative evaluators")]
    MissingDerivative(String),

    #[error("rate fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),

    #[error("rate fit needs positive data, got {0}")]
    NonPositive(f64),

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: bad magic bytes")]
    BadMagic { path: PathBuf },

    #[error("{path}: unsupported snapshot version {version}")]
    Version { path: PathBuf, version: u32 },

    #[error("{path}: truncated payload (expected {expected} bytes, found {found})")]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("{path}: unexpected field kind {found}")]
    WrongKind { path: PathBuf, found: u32 },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
