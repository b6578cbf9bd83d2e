use thiserror::Error;

/// Errors raised by the kernel-space library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// The combined quadratic form of an inner product has a real part that is
    /// not positive definite, so the defining integral diverges.
    #[error(
        "divergent norm: smallest eigenvalue of the real quadratic form is {min_eigenvalue:e}"
    )]
    DivergentNorm { min_eigenvalue: f64 },

    #[error("invalid kernel specification: {0}")]
    InvalidKernel(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate immersion at {point:?}: {detail}")]
    DegenerateImmersion { point: Vec<f64>, detail: String },

    #[error("indefinite kernel rejected: {0}")]
    IndefiniteKernel(String),

    #[error("expected a pure delta element: {0}")]
    NotADelta(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(
        "analytic metric disagrees with the pullback metric at {point:?} (deviation {deviation:e})"
    )]
    SelfConsistency { point: Vec<f64>, deviation: f64 },

    #[error("unknown catalog entry '{0}'")]
    UnknownManifold(String),

    #[error("point {point:?} lies outside the domain")]
    OutOfDomain { point: Vec<f64> },

    #[error("duplicate source point {0:?}")]
    DuplicatePoint(Vec<f64>),

    #[error("element has a term outside the operator span: {0}")]
    OutsideSpan(String),

    #[error("map is not affine; gaussian terms cannot be pushed forward")]
    NonAffine,

    #[error("incompatible transformation and kernel: {0}")]
    Incompatible(String),

    #[error("invalid group element: {0}")]
    InvalidGroupElement(String),

    #[error("slice times differ: {0} vs {1}")]
    SliceMismatch(f64, f64),

    #[error("singular matrix: {0}")]
    Singular(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
