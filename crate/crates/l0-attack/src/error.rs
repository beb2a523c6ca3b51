use thiserror::Error;

/// Errors shared across the crate.
#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("ring mismatch: expected {expected}, got {got}")]
    RingMismatch { expected: String, got: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no feasible polynomial after {retries} retries (last R = {last_r}); c_R too small")]
    NoFeasiblePolynomial { retries: usize, last_r: usize },
    #[error("state space too large: {0}")]
    StateSpaceTooLarge(String),
    #[error("numerically singular matrix: {0}")]
    SingularMatrix(String),
    #[error("config validation failed: {0}")]
    ConfigValidation(String),
    #[error("descriptor has no required answer: {0}")]
    NoRequiredAnswer(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
