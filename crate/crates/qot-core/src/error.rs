//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum QotError {
    /// A measure violates one of its invariants. The message names the
    /// offending field (`weights`, `points`, ...) first.
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The cost cannot be evaluated at a requested point pair (explicit
    /// matrices are only defined on their own atom grid).
    #[error("cost not evaluable: {0}")]
    CostNotEvaluable(String),

    /// The dual solver stopped at `max_sweeps` with the given residual, or a
    /// caller handed a non-converged iterate to an operation that needs a
    /// converged one.
    #[error("dual solve not converged: residual {residual:.3e} after {sweeps} sweeps")]
    NotConverged { sweeps: usize, residual: f64 },

    #[error("instance too large for the dense oracle: {cells} cells > {limit}")]
    OracleSizeLimit { cells: usize, limit: usize },

    #[error("internal: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, QotError>;
