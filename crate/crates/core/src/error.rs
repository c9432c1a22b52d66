use thiserror::Error;

/// Errors produced by ecclab operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("brute-force oracle limited to {max} points, got {n}")]
    SizeLimit { n: usize, max: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("no closed form available for {0}; use the quadrature method")]
    ClosedFormUnavailable(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("inversion failed at contour node {node}: {msg}")]
    Inversion { node: usize, msg: String },

    #[error("smoothness pre-check failed: {0}")]
    Precheck(String),

    #[error("initial-value denominator vanishes for k = {k} (polynomial coefficients {coeffs:?})")]
    DegenerateDenominator { k: usize, coeffs: Vec<f64> },

    #[error("reconstruction failed: {0}")]
    Reconstruction(String),

    #[error("trial {index} failed: {source}")]
    Trial {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
