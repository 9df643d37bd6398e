use thiserror::Error;

/// Errors surfaced by problem evaluation and the solver stack.
#[derive(Debug, Error)]
pub enum CcopError {
    /// A vector or matrix had the wrong dimension for the problem.
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// An evaluator produced NaN or infinity. Silent propagation would
    /// corrupt multiplier updates, so this aborts the operation.
    #[error("non-finite value from {what}")]
    NonFinite { what: &'static str },

    /// A configuration value violated its documented invariant.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A problem definition violated its documented invariant.
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

pub type Result<T> = std::result::Result<T, CcopError>;
