//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("eigensolver did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },

    #[error("eigendecomposition failed for {0}")]
    DecompositionFailure(String),

    #[error("matrix is singular or not positive definite")]
    SingularMatrix,

    #[error("matrix is not Hermitian: max asymmetry {0:.3e}")]
    NotHermitian(f64),

    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("codebook design collapsed: max cross-correlation {0:.4} after the iteration budget")]
    DesignFailure(f64),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}
