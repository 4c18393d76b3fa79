use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A theorem hypothesis or admissibility inequality failed; the message names it.
    #[error("{0}")]
    Hypothesis(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("step refused at t = {t}: dt = {dt} exceeds stability limit {limit}")]
    Stability { t: f64, dt: f64, limit: f64 },

    #[error("density undershoot {value:e} at x = {x}, t = {t} (tolerance {tolerance:e})")]
    Negativity { t: f64, x: f64, value: f64, tolerance: f64 },

    #[error("simulation failed at t = {t}: {source}")]
    AtTime {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("monotonicity violated: {0}")]
    NonMonotone(String),

    #[error("envelope violated: {0}")]
    Envelope(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: Box::new(self) }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
