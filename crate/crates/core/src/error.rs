use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions {width}x{height}: {reason}")]
    InvalidDimensions {
        width: u32,
        height: u32,
        reason: &'static str,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("failed to decode image {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("malformed frame stream: {0}")]
    MalformedStream(String),

    #[error("no input: {0}")]
    NoInput(String),

    #[error("backend failure: {0}")]
    Backend(String),

    /// The backend returned something that is not a 4-way distribution.
    #[error("backend contract violated: {0}")]
    BackendContract(String),

    #[error("tile {index} is {width}x{height}, below the {min}x{min} minimum")]
    TileTooSmall {
        index: usize,
        width: u32,
        height: u32,
        min: u32,
    },

    #[error("tile {index}: {source}")]
    Tile {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("external enhancer failed: {0}")]
    Enhancer(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit status for this error class.
    ///
    /// 1: I/O failure, 2: bad input, 3: backend failure, 4: tile too small.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Io { .. } => 1,
            Error::InvalidDimensions { .. }
            | Error::InvalidParameter { .. }
            | Error::Decode { .. }
            | Error::MalformedStream(_)
            | Error::NoInput(_)
            | Error::Enhancer(_) => 2,
            Error::Backend(_) | Error::BackendContract(_) => 3,
            Error::TileTooSmall { .. } => 4,
            Error::Tile { source, .. } => source.exit_code(),
        }
    }
}
