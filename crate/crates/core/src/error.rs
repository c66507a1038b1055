use thiserror::Error;

/// Everything that can go wrong while building or evolving a model.
#[derive(Debug, Error)]
pub enum QbeError {
    #[error("representation mismatch: expected {expected}, got {found}")]
    RepresentationMismatch {
        expected: &'static str,
        found: String,
    },

    #[error("basis too small: {0}")]
    BasisTooSmall(String),

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("matrix is not Hermitian (relative defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("function undefined at eigenvalue {eigenvalue}")]
    Domain { eigenvalue: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("basis mismatch between operands")]
    BasisMismatch,

    #[error(
        "grid does not resolve the Fock subspace (round-trip error {error:.3e} > {threshold:.1e})"
    )]
    Resolution { error: f64, threshold: f64 },

    #[error("superoperator dimension {dim}^2 exceeds the cap of {cap}")]
    SizeCap { dim: usize, cap: usize },

    #[error("total Hilbert dimension {dim} exceeds the cap of {cap}")]
    TotalDimension { dim: usize, cap: usize },

    #[error("matrix exponential overflowed (1-norm of exponent {norm:.3e})")]
    Overflow { norm: f64 },

    #[error(
        "thermal sandwich is ill-conditioned: spectrum spans [{e_min:.4}, {e_max:.4}] \
         giving condition number {condition:.3e} > 1e12"
    )]
    Conditioning {
        e_min: f64,
        e_max: f64,
        condition: f64,
    },

    #[error("inverse eta-map is ill-posed: amplification {amplification:.3e} exceeds {cap:.1e}")]
    IllPosed { amplification: f64, cap: f64 },

    #[error("unsupported representation for {0}")]
    UnsupportedRepresentation(&'static str),

    #[error("initial state is not positive: eigenvalue {eigenvalue:.3e}")]
    NotPositive { eigenvalue: f64 },

    #[error("cannot normalize: trace {trace:.3e} is below 1e-12")]
    Normalization { trace: f64 },

    #[error("recovered sigma(0) lies outside the positive domain: min eigenvalue {min_eig:.3e}")]
    DomainViolation { min_eig: f64 },

    #[error("step size underflow at t = {t:.6e} (h = {h:.3e}); the generator is stiff, use the expm method")]
    Stiffness { t: f64, h: f64 },

    #[error("bath truncation too small: mode {mode} keeps population {population:.3e} above level {dim}")]
    BathTruncation {
        mode: usize,
        dim: usize,
        population: f64,
    },

    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

impl From<ndarray_linalg::error::LinalgError> for QbeError {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        QbeError::Linalg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, QbeError>;
