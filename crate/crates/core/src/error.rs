//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("id {0:?} not found")]
    NotFound(String),

    #[error("library is empty")]
    EmptyLibrary,

    #[error("k must be at least 1, got {0}")]
    InvalidK(usize),

    #[error("index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("anchor and negative share index {0}")]
    SameIndex(usize),

    #[error("batch of {0} rows is too small to form triplets")]
    BatchTooSmall(usize),

    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("empty input")]
    EmptyInput,

    #[error("pool size {pool_size} exceeds library size {library_size}")]
    PoolTooLarge { pool_size: usize, library_size: usize },

    #[error("true id {0:?} not present in library")]
    MissingTrueId(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("consistency error: {0}")]
    Consistency(String),
}

impl Error {
    pub(crate) fn dims(expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch { expected, actual }
    }
}
