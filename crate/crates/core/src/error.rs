use thiserror::Error;

/// Errors produced across the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not row-stochastic: {0}")]
    NonStochastic(String),
    #[error("chain has no unique stationary distribution")]
    NoUniqueStationary,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("envelope fit failed: {0}")]
    Fit(String),
    #[error("index {index} out of range 1..={len}")]
    Index { index: usize, len: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("linear system is singular (condition estimate {0:e})")]
    SingularSystem(f64),
    #[error("quadratic form is negative: {0:e}")]
    NegativeQuadraticForm(f64),
    #[error("non-finite iterate at t = {t}{}", .trial.map(|i| format!(" (trial {i})")).unwrap_or_default())]
    NonFinite { t: usize, trial: Option<usize> },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
