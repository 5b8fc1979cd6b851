use std::path::PathBuf;

use thiserror::Error;

/// Coarse error category, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Io,
    Validation,
    Solver,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
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

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("non-manifold boundary: edges {0:?} have more than two boundary faces")]
    NonManifold(Vec<(usize, usize)>),

    #[error("guidance: {0}")]
    Guidance(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("solver: {0}")]
    Solver(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::Parse { .. }
            | Error::Mesh(_)
            | Error::NonManifold(_)
            | Error::Guidance(_)
            | Error::Invalid(_) => ErrorKind::Validation,
            Error::Solver(_) => ErrorKind::Solver,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
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
}

pub type Result<T> = std::result::Result<T, Error>;
