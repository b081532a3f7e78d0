//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors produced by validation, capacity guards, and numerical routines.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Input violates a documented invariant (shapes, ranges, ordering).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A price entry is missing, non-finite, or not strictly positive.
    #[error("invalid price at row {row} ({date}), column {column} ({label}): {message}")]
    InvalidPrice {
        row: usize,
        column: usize,
        date: String,
        label: String,
        message: String,
    },

    /// Operand shapes do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The request exceeds an enumeration or table guard.
    #[error("capacity exceeded: {0}")]
    CapacityExceeded(String),

    /// Moments are saturated or otherwise outside the fittable region.
    #[error("degenerate moments: {0}")]
    DegenerateMoments(String),

    /// The covariance matrix could not be inverted even after regularization.
    #[error(
        "ill-conditioned covariance: smallest eigenvalue {smallest_eigenvalue:e} \
         after adding ridge {ridge:e}"
    )]
    IllConditioned {
        smallest_eigenvalue: f64,
        ridge: f64,
    },

    /// The interaction matrix carries no usable off-diagonal structure.
    #[error("degenerate graph: {0}")]
    DegenerateGraph(String),

    /// Too few observations or support points for the requested estimate.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A text input could not be parsed; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type CoreResult<T> = Result<T, CoreError>;
