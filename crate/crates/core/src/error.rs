use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file was readable but structurally wrong (bad header, wrong column
    /// count, unparseable CSV framing).
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    /// A record failed validation. `row` is the 1-based data row (the header
    /// does not count).
    #[error("data row {row}: field `{field}`: {message}")]
    InvalidRecord {
        row: usize,
        field: &'static str,
        message: String,
    },

    #[error("empty portfolio")]
    EmptyPortfolio,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// CCF estimation found no observation with a usable denominator.
    #[error("no usable defaulter observations")]
    NoUsableDefaulters,

    #[error("episode is terminal; reset before stepping")]
    TerminalEpisode,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("wape is undefined when every truth value is zero")]
    AllZeroTruth,

    #[error("class {class} has {size} rows; oversampling requires more than k = {k}")]
    ClassTooSmallForSmote { class: usize, size: usize, k: usize },

    #[error("class {class} has {rows} rows; the configured floor is {floor}")]
    InsufficientClassRows {
        class: usize,
        rows: usize,
        floor: usize,
    },

    #[error("unsupported model file: {0}")]
    ModelFormat(String),

    #[error("mismatched evaluation contexts: {0}")]
    MismatchedContext(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
