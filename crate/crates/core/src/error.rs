use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScioError {
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("{what} did not converge after {iterations} iterations (last value {last})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        last: f64,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("column {index} is degenerate: diagonal entry {value} is not positive")]
    DegenerateColumn { index: usize, value: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ScioError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(ScioError::InvalidInput(msg.into()))
}
