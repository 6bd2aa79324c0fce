//! Error metrics, ranking agreement, and benchmark report assembly.

mod metrics;
mod report;

pub use metrics::*;
pub use report::*;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    Empty,
    #[error("fraction {0} outside (0, 1]")]
    InvalidFraction(f64),
    #[error("bin width {0} must be positive")]
    InvalidBinWidth(f64),
    #[error("threshold {0} must be positive")]
    InvalidThreshold(f64),
    #[error("relevance values must be finite and non-negative")]
    InvalidRelevance,
    #[error("all relevance values are zero")]
    ZeroRelevance,
    #[error("index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("inconsistent report inputs: {0}")]
    Inconsistent(String),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, EvalError>;
