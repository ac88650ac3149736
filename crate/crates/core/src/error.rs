use thiserror::Error;

/// Errors raised by walklab computations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty point set")]
    EmptySet,

    #[error("invalid input `{field}`: {reason}")]
    InvalidInput { field: String, reason: String },

    #[error("{what} exceeds cap ({size} > {cap})")]
    CapExceeded { what: String, size: usize, cap: usize },

    #[error("degenerate walk: |nu_hat(h)| = 1 at h = {h:?}")]
    DegenerateWalk { h: Vec<i64> },

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("spectral cache covers ||h|| < {available}, but {required} was requested")]
    InsufficientCoverage { available: usize, required: usize },

    #[error("unsupported dimension {d}: {reason}")]
    UnsupportedDimension { d: usize, reason: String },

    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn cap(what: impl Into<String>, size: usize, cap: usize) -> Self {
        Error::CapExceeded {
            what: what.into(),
            size,
            cap,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
