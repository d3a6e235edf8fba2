use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Input data is present but unusable (non-finite samples and the like).
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("malformed WAV: {chunk} chunk: {reason}")]
    WavFormat { chunk: &'static str, reason: String },

    #[error("unsupported WAV encoding: {0}")]
    UnsupportedFormat(String),

    #[error("WAV file contains no audio data")]
    EmptyAudio,

    #[error("model file: {field}: {reason}")]
    Model { field: String, reason: String },

    #[error("parse error in {what}: {reason}")]
    Parse { what: String, reason: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Any failure while processing a particular input file.
    #[error("{}: {source}", path.display())]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn model(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Model {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(what: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parse {
            what: what.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn in_file(path: impl Into<PathBuf>, source: Error) -> Self {
        match source {
            e @ (Error::Io { .. } | Error::InFile { .. }) => e,
            e => Error::InFile {
                path: path.into(),
                source: Box::new(e),
            },
        }
    }

    /// True for failures caused by the filesystem rather than by the data.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::InFile { source, .. } => source.is_io(),
            _ => false,
        }
    }
}
