use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed LVCF header or payload value.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// File shorter or longer than the header declares.
    #[error("length error: {what}: expected {expected} bytes, found {found}")]
    Length {
        what: &'static str,
        expected: u64,
        found: u64,
    },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("unknown speaker id `{0}`")]
    UnknownSpeaker(String),

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("singular value decomposition did not converge")]
    SvdConvergence,

    #[error("parse error in {}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
