use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("vertex {0:?} lies outside the box")]
    OutsideBox(Vec<i64>),

    #[error("{what}: requested {requested}, limit {limit}")]
    CapExceeded {
        what: &'static str,
        requested: u128,
        limit: u128,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("vertex set must be nonempty")]
    EmptySet,

    #[error("vertex sets must be disjoint")]
    OverlappingSets,

    #[error("vertex does not satisfy the subset predicate")]
    OutsideSubset,

    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),

    #[error("cross-check failed: {0}")]
    CrossCheck(String),

    #[error("unsupported format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
