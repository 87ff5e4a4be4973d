use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("emitter {index} at ({x_nm} nm, {y_nm} nm) lies outside the field of view")]
    EmitterOutOfBounds { index: usize, x_nm: f64, y_nm: f64 },

    #[error("unknown scenario '{0}' (expected Test1a, Test2a, Test3a or tubulin)")]
    UnknownScenario(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("frames missing from the ground truth: {0:?}")]
    MissingFrames(Vec<u32>),

    #[error("{0}: no such file or directory")]
    MissingPath(PathBuf),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_)
            | Error::Dimension(_)
            | Error::EmitterOutOfBounds { .. }
            | Error::UnknownScenario(_)
            | Error::MissingFrames(_)
            | Error::MissingPath(_) => 2,
            Error::Numerical(_) => 3,
            Error::Format { .. } | Error::Io { .. } => 4,
        }
    }
}
