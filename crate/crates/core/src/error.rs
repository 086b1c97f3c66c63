use thiserror::Error;

use crate::spectral::SpectralIndex;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("overflow evaluating {0}")]
    Overflow(String),

    #[error("Newton iteration for Gauss-Jacobi node {node} of {npts} did not converge")]
    NodeConvergence { node: usize, npts: usize },

    #[error("Hermitian eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    EigenConvergence { sweeps: usize, off_norm: f64 },

    #[error("rule too coarse for degree {degree}: {detail}")]
    Resolution { degree: usize, detail: String },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("rule kind {found} cannot be used here (expected {expected})")]
    RuleKind { found: String, expected: String },

    #[error("coefficient at {index} is negative ({value:e})")]
    NegativeCoefficient { index: SpectralIndex, value: f64 },

    #[error("coefficient at {index} is not real (imaginary part {imag:e})")]
    NonRealCoefficient { index: SpectralIndex, imag: f64 },

    #[error("eigenvalue {index} is negative ({value:e})")]
    NegativeEigenvalue { index: usize, value: f64 },

    #[error("kernel is not hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("operator is not positive semidefinite (residual diagonal {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("invalid coefficient table: {0}")]
    InvalidTable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
