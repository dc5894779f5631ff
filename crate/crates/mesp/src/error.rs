//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum MespError {
    #[error("matrix is not symmetric: max asymmetry {asymmetry:.3e} exceeds tolerance {tol:.3e}")]
    NonSymmetric { asymmetry: f64, tol: f64 },

    #[error("matrix is not positive semidefinite: smallest eigenvalue {lambda_min:.3e}")]
    NonPsd { lambda_min: f64 },

    #[error("symmetric eigendecomposition did not converge")]
    EigFailure,

    #[error("vector lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("matrix dimensions do not match: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("rank {rank} is below the required {needed}; the envelope value is +infinity here")]
    RankDeficient { rank: usize, needed: usize },

    #[error("matrix is singular (smallest eigenvalue {lambda_min:.3e})")]
    Singular { lambda_min: f64 },

    #[error("covariance matrix must be full rank for complementation (rank {rank} of {dim})")]
    SingularC { rank: usize, dim: usize },

    #[error("principal submatrix is singular")]
    SingularSubmatrix,

    #[error("linx system matrix is not positive definite")]
    SingularL,

    #[error("binary point has cardinality {cardinality}, expected {expected}")]
    InfeasibleBinary { cardinality: usize, expected: usize },

    #[error("point is not feasible for the capped simplex: {0}")]
    InfeasibleXHat(String),

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("enumeration too large: {count} subsets exceeds limit {limit}")]
    TooLarge { count: u128, limit: u128 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid synthetic spec: {0}")]
    BadSpec(String),

    #[error("empty solve history")]
    EmptyHistory,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MespError>;
