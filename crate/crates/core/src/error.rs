use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes, used by the command-line driver to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Caller supplied an invalid argument or configuration.
    Argument,
    /// Input data could not be read or does not meet a precondition.
    Data,
    /// A numerical invariant broke during training.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("negative entry {value} at flat index {index}")]
    NegativeInput { index: usize, value: f64 },

    #[error("non-finite entry at flat index {index}")]
    NonFiniteEntry { index: usize },

    #[error("dictionary column {0} sums to zero (dead atom)")]
    ZeroColumn(usize),

    #[error("initial activation {index} is not strictly positive")]
    NonPositiveInit { index: usize },

    #[error("statistics at ({row}, {col}) have a > 0 with b = 0")]
    InconsistentStats { row: usize, col: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("objective increased from {previous} to {current} at epoch {epoch}")]
    DivergedObjective {
        epoch: usize,
        previous: f64,
        current: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("bad magic bytes")]
    BadMagic,

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated payload: expected {expected} values, found {found}")]
    TruncatedPayload { expected: u64, found: u64 },

    #[error("signal of {len} samples is shorter than the {window}-sample window")]
    TooShort { len: usize, window: usize },

    #[error("every frame was discarded as silent")]
    AllSilent,

    #[error("unsupported audio: {0}")]
    UnsupportedFormat(String),

    #[error("malformed report: {0}")]
    MalformedReport(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidConfig(_) => ErrorClass::Argument,
            Error::ZeroColumn(_)
            | Error::NonPositiveInit { .. }
            | Error::InconsistentStats { .. }
            | Error::DivergedObjective { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn shape(expected: (usize, usize), found: (usize, usize)) -> Self {
        Error::ShapeMismatch { expected, found }
    }
}
