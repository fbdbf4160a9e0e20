use std::path::PathBuf;

/// Errors produced by the simulation toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation (e.g. a non-finite argument).
    #[error("domain error: {0}")]
    Domain(String),

    /// Shapes or structural invariants do not line up.
    #[error("structural error: {0}")]
    Structural(String),

    /// A profile or configuration document failed validation.
    #[error("invalid field `{field}`: {reason}")]
    Validation { field: String, reason: String },

    /// An object was used in the wrong lifecycle state (e.g. scaling delays twice).
    #[error("state error: {0}")]
    State(String),

    /// Bad argument to an operation.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Numerical failure, such as a singular system.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Malformed file content.
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("malformed dataset file: {0}")]
    Format(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error: 2 usage/config, 3 I/O, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            Error::Numerical(_) => 4,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
