use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("input vector is all zeros")]
    ZeroInput,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no free neurons left (capacity {capacity})")]
    CapacityExhausted { capacity: usize },

    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("snapshot format error: {0}")]
    Snapshot(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}
