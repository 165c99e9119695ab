//! Shared error type for the whole library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor/graph shape disagreement; carries both offending shapes.
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    /// A scalar argument or configuration value is out of its legal range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// An API contract was violated (e.g. backward on a non-scalar loss).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A persisted record failed to parse; names the line and field.
    #[error("malformed record at line {line}, field `{field}`: {reason}")]
    MalformedRecord {
        line: usize,
        field: String,
        reason: String,
    },

    /// A value failed domain validation; names the field.
    #[error("validation failed for field `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    /// Eye stream has no usable anchor records left.
    #[error("unrecoverable eye stream: {0}")]
    UnrecoverableStream(String),

    /// Statistic has no defined value on this input (e.g. zero variance).
    #[error("undefined statistic: {0}")]
    Undefined(String),

    /// Numerical failure during training/evaluation (NaN loss etc.).
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
