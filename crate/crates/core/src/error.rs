use std::io;

use thiserror::Error;

use crate::seqio::Modality;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong between reading a container and emitting a
/// position plan.
#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    #[error("bad magic {found:?}, expected \"MEMB\"")]
    MagicMismatch { found: [u8; 4] },

    #[error("unsupported container version {0}")]
    UnsupportedVersion(u32),

    #[error("malformed container header: {0}")]
    InvalidHeader(String),

    #[error("truncated payload: header declares {expected} bytes, file holds {available}")]
    TruncatedPayload { expected: u64, available: u64 },

    #[error("{0} trailing bytes after declared payloads")]
    TrailingBytes(u64),

    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid sequence: {0}")]
    InvalidSequence(String),

    #[error("invalid generator spec: {0}")]
    InvalidGeneratorSpec(String),

    #[error("{0:?} segment has no tokens")]
    EmptySegment(Modality),

    #[error("log-determinant failed: neither Cholesky nor eigendecomposition converged")]
    FactorizationFailure,

    #[error("raw-ratio normalization needs positive entropies, got text={text}, vision={vision}")]
    RawRatioRequiresPositive { text: f64, vision: f64 },

    #[error("contribution vector is not a valid distribution: {0}")]
    NonPositiveContribution(String),

    #[error("unified contribution of {0:?} is zero")]
    ZeroContribution(Modality),

    #[error("stride must be positive and finite, got {0}")]
    InvalidStride(f64),

    #[error("layout has no tokens")]
    EmptyLayout,

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("oracle limited to N <= {max_tokens} and d <= {max_dim}, got N={tokens}, d={dim}")]
    OracleSizeExceeded { tokens: usize, dim: usize, max_tokens: usize, max_dim: usize },

    #[error("alpha must lie in [0, 1], got {0}")]
    AlphaOutOfRange(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Io,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io(_) => ErrorClass::Io,
            Error::FactorizationFailure | Error::ZeroContribution(_) => ErrorClass::Numerical,
            _ => ErrorClass::Validation,
        }
    }
}
