//! Error types shared across the engine.

use thiserror::Error;

/// Errors produced by the settlement, scoring, and replay machinery.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("quantile level {0} outside (0, 1)")]
    InvalidLevel(f64),
    #[error("market impact coefficient must be positive, got {0}")]
    InvalidCoefficient(f64),
    #[error("no periods to evaluate: {0}")]
    EmptyEvaluation(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("model not fitted: {0}")]
    Unfitted(String),
    #[error("load error in {path} (row {row}): {message}")]
    Load {
        path: String,
        row: usize,
        message: String,
    },
    #[error("alignment failed: {0}")]
    Alignment(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Shorthand used by validators that reject non-finite numbers.
    pub fn not_finite(what: &str, value: f64) -> Self {
        Error::InvalidInput(format!("{what} must be finite, got {value}"))
    }
}
