use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("unsupported problem class: {0}")]
    UnsupportedClass(String),

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error("evaluator timed out after {0} ms")]
    Timeout(u64),

    #[error("function-evaluation budget exhausted ({used}/{limit})")]
    BudgetExhausted { used: usize, limit: usize },

    #[error("unsupported format version: {0}")]
    VersionMismatch(String),

    #[error("corrupt payload: {0}")]
    Corrupt(String),

    #[error("non-finite loss at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("training failed for instance {id}: {source}")]
    Training { id: String, source: Box<Error> },

    #[error("repository mismatch: {0}")]
    Fingerprint(String),

    #[error("missing record: {0}")]
    MissingRecord(String),

    #[error("record count mismatch: manifest lists {manifest}, found {found}")]
    CountMismatch { manifest: usize, found: usize },

    #[error("non-finite objective value")]
    NonFinite,

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn corrupt(msg: impl Into<String>) -> Self {
        Error::Corrupt(msg.into())
    }
}
