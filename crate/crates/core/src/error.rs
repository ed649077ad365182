//! Error type shared by every module of the core crate.

use thiserror::Error;

/// Failures reported by the core library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FbmsError {
    /// A point was passed to a chart outside of its closed domain.
    #[error("out of chart: {0}")]
    OutOfChart(String),
    /// Parameters violate a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// A sampled field violates the precondition of an operator.
    #[error("invalid field: {0}")]
    InvalidField(String),
    /// A series or quadrature did not reach the requested tolerance.
    #[error("not converged: {0}")]
    NotConverged(String),
    /// The construction is not realizable for the requested `(n, genus)`.
    #[error("infeasible construction: {0}")]
    Infeasible(String),
    /// A linear solve or factorization failed.
    #[error("linear algebra failure: {0}")]
    Linear(String),
    /// Nonlinear iteration left its basin.
    #[error("divergence: {0}")]
    Divergence(String),
}

/// Result alias for the core crate.
pub type Result<T> = std::result::Result<T, FbmsError>;
