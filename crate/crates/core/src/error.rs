use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the identification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in column `{column}`: {message}")]
    Parse { column: String, message: String },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("domain error at index {index}: {message}")]
    Domain { index: usize, message: String },

    #[error("cannot extrapolate: grid point {point} lies outside the known range [{min}, {max}]")]
    Extrapolation { point: i64, min: i64, max: i64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("index {index} out of range for {len} nodes")]
    Index { index: usize, len: usize },

    #[error("singular normal equations: {0}; use a ridge > 0")]
    Singular(String),

    #[error(
        "exhaustive search needs {subsets} subsets but the budget is {budget}; use cols or rwls, or raise the budget"
    )]
    Budget { subsets: u128, budget: u128 },

    #[error("simulation diverged at node {node} (step {step})")]
    Instability { node: usize, step: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("node {node}: {source}")]
    Node {
        node: String,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numerical,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parse { .. }
            | Error::Dimension(_)
            | Error::Config(_)
            | Error::Index { .. }
            | Error::Budget { .. }
            | Error::Json(_) => ErrorKind::Config,
            Error::Domain { .. }
            | Error::Extrapolation { .. }
            | Error::Singular(_)
            | Error::Instability { .. } => ErrorKind::Numerical,
            Error::Io { .. } => ErrorKind::Io,
            Error::Node { source, .. } => source.kind(),
        }
    }

    /// Process exit code: 2 config, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Config => 2,
            ErrorKind::Numerical => 3,
            ErrorKind::Io => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_node(self, node: impl Into<String>) -> Self {
        Error::Node {
            node: node.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
