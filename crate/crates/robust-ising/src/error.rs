use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument or inconsistent inputs.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Input outside the operation's domain (e.g. a non-spin entry).
    #[error("domain error: {0}")]
    Domain(String),

    /// Dimension or size mismatch between inputs.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Resource limit exceeded (enumeration cap, memory budget).
    #[error("capacity error: {0}")]
    Capacity(String),

    /// Numerical failure (non-convergence, residual too large).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Problem constraints refused the requested operation. Carries the
    /// evaluated left- and right-hand sides of the violated inequality.
    #[error("constraint refused: lhs {lhs} > rhs {rhs}: {context}")]
    ConstraintRefused { lhs: f64, rhs: f64, context: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
