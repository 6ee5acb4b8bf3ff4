use std::io;
use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller supplied an argument outside the operation's domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A raw video stream ended before the requested frame was complete.
    #[error("failed to decode frame {frame}: {reason}")]
    Decode { frame: usize, reason: String },

    /// A text input (CSV/TOML) could not be parsed.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    /// A parsed value lies outside its legal range.
    #[error("{path}:{line}: value out of range: {message}")]
    Range {
        path: String,
        line: u64,
        message: String,
    },

    /// A persisted model or cache does not match the expected schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// Input data is inconsistent or insufficient for the requested computation.
    #[error("{0}")]
    Data(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Stream(#[from] io::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
