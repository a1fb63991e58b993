use thiserror::Error;

/// Errors raised by the library. Every variant is an input error: the
/// computations themselves are total once their inputs validate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("non-finite value {value} in {context}")]
    NonFinite { value: f64, context: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("need at least {min} observations, got {got}")]
    TooFewObservations { min: usize, got: usize },

    #[error("joint probabilities sum to {0}, expected 1")]
    ProbabilitySum(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
