use std::io;

/// Errors raised by the library.
///
/// Every variant except [`Error::Io`] describes bad data or a bad request;
/// callers that need to distinguish the two can use [`Error::is_io`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("vocabulary is empty after applying min_count = {min_count}")]
    EmptyVocabulary { min_count: usize },

    #[error("word id {id} out of range for vocabulary of size {size}")]
    WordOutOfRange { id: usize, size: usize },

    #[error("context is empty")]
    EmptyContext,

    #[error("no training samples")]
    NoSamples,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("forward cache missing: {0}")]
    MissingCache(&'static str),

    #[error("record {id:?}: {reason}")]
    BadRecord { id: String, reason: String },

    #[error("no caption records")]
    NoRecords,

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }

    pub(crate) fn parse(line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            line,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
