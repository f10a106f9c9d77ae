//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode {path}: {reason}")]
    AudioDecode { path: String, reason: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("shape mismatch in {context}: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("{path}:{line}: malformed annotation: {reason}")]
    MalformedAnnotation {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("cannot parse chord label {0:?}")]
    UnparseableLabel(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("container error in {path}: {reason}")]
    Container { path: String, reason: String },

    #[error("{0}")]
    Train(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn container(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Container {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
