use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the engine.
///
/// The CLI maps each variant onto a process exit code with [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {what} at {location}: {message}")]
    Parse {
        what: String,
        location: String,
        message: String,
    },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    TokenOutOfRange { id: u32, vocab_size: usize },

    #[error("tokenizer mismatch: database was built with `{expected}`, got `{found}`")]
    TokenizerMismatch { expected: String, found: String },

    #[error("unsupported database format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error("embedding dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("no source files matched under {0}")]
    NoFiles(PathBuf),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("protocol error: {0}")]
    Protocol(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: impl Into<String>, location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            what: what.into(),
            location: location.into(),
            message: message.into(),
        }
    }

    /// Process exit code: 1 usage, 2 data/validation, 3 model/transport.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) => 1,
            Error::Model(_) | Error::Protocol(_) => 3,
            _ => 2,
        }
    }
}
