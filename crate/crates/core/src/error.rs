use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("entity {entity} out of bounds: {detail}")]
    OutOfBounds { entity: String, detail: String },

    #[error("partition lease error: {0}")]
    Lease(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("checkpoint truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("entity {0} has no engagements with clustered targets")]
    NoEngagements(String),

    #[error("no known neighbors")]
    NoKnownNeighbors,

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("stage order violation: {0}")]
    StageOrder(String),
}

impl Error {
    /// I/O failure on `path`; a missing file maps to its own kind.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Short machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => "missing_file",
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Schema(_) => "schema",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::OutOfBounds { .. } => "out_of_bounds",
            Error::Lease(_) => "lease",
            Error::Checkpoint(_) => "checkpoint",
            Error::Truncated { .. } => "truncated",
            Error::Shape(_) => "shape",
            Error::Sampling(_) => "sampling",
            Error::NoEngagements(_) => "no_engagements",
            Error::NoKnownNeighbors => "no_known_neighbors",
            Error::Eval(_) => "eval",
            Error::Config(_) => "config",
            Error::StageOrder(_) => "stage_order",
        }
    }
}
