use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// The variants are grouped so that front ends can map them onto exit codes:
/// configuration problems, data problems and numeric failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch, {lhs} vs {rhs}")]
    Shape {
        op: &'static str,
        lhs: String,
        rhs: String,
    },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("graph error: {0}")]
    Graph(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(op: &'static str, lhs: impl std::fmt::Display, rhs: impl std::fmt::Display) -> Self {
        Error::Shape {
            op,
            lhs: lhs.to_string(),
            rhs: rhs.to_string(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by input files or their contents.
    pub fn is_data_error(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Format { .. } | Error::Data { .. })
    }

    /// True for NaN/divergence style failures.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_))
    }
}
