use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (residual {residual:.3e})")]
    NonHermitian { residual: f64 },

    #[error("parity violation: expected {expected} operator, residual {residual:.3e}")]
    Parity { expected: &'static str, residual: f64 },

    #[error("idempotent is not self-adjoint (residual {residual:.3e})")]
    NotSelfAdjoint { residual: f64 },

    #[error("matrix is not idempotent (residual {residual:.3e})")]
    NotIdempotent { residual: f64 },

    #[error(
        "eigenvalue {eigenvalue:.3e} of the Laplacian lies within a decade of the kernel threshold {threshold:.3e}"
    )]
    SpectralGap { eigenvalue: f64, threshold: f64 },

    #[error("index value {value} is not within {tolerance} of an integer")]
    NonIntegerIndex { value: f64, tolerance: f64 },

    #[error("pairing series did not converge by degree {degree} (last term {last_term:.3e})")]
    NonConvergent { degree: usize, last_term: f64 },

    #[error("chain degree {degree} exceeds the limit {limit}")]
    DegreeTooLarge { degree: usize, limit: usize },

    #[error("operation would produce {terms} elementary terms (limit {limit})")]
    TooManyTerms { terms: u128, limit: u128 },

    #[error("simplex point is not ordered: {0:?}")]
    SimplexOrder(Vec<f64>),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
