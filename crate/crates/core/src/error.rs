//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Factorization failed even after the diagonal jitter policy was
    /// exhausted (epsilon escalated from 1e-10 to 1e-6 times the mean
    /// diagonal).
    #[error("matrix of order {order} is not positive definite (jitter up to {max_epsilon:e} exhausted)")]
    NotPositiveDefinite { order: usize, max_epsilon: f64 },

    /// The GLS normal matrix X^T Sigma^-1 X is numerically singular.
    #[error("gram matrix is numerically singular (condition estimate {cond:.3e})")]
    SingularGram { cond: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    /// An objective or gradient evaluation failed during optimization; the
    /// offending covariance parameters are carried for diagnostics.
    #[error("objective evaluation failed at theta = {theta:?}: {source}")]
    ObjectiveEvaluation {
        theta: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn dim(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::InvalidData(msg.into())
    }
}
