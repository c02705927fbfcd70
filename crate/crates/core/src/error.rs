use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed text input (OFF, checkpoint, cache, manifest) with the 1-based line.
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("zero-length pair")]
    ZeroLengthPair,

    #[error("degenerate darboux frame")]
    DegenerateFrame,

    #[error("unknown feature mode '{0}'")]
    UnknownFeatureMode(String),

    #[error("unknown convolution kind '{0}'")]
    UnknownConvKind(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("pseudo-coordinate {0:?} outside [0,1]^3")]
    PseudoCoordinate([f64; 3]),

    #[error("expected {expected} structure meshes, got {got}")]
    StructureCount { expected: usize, got: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("degenerate label set")]
    DegenerateLabels,

    /// A configuration value disagrees with data or a checkpoint; `field` names it.
    #[error("config mismatch on '{field}': {message}")]
    Config { field: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
