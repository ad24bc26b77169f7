use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A user supplied parameter is outside its admissible range.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    /// The generated or loaded geometry violates a structural requirement.
    #[error("geometry error: {0}")]
    Geometry(String),

    /// A factorization or solve failed, or a numerical invariant was violated.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("corrector for coarse dof {coarse_dof} failed: {reason}")]
    Corrector { coarse_dof: usize, reason: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 for numerical failures, 2 for configuration and I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) | Error::Corrector { .. } | Error::Geometry(_) => 1,
            Error::InvalidParameter { .. } | Error::Format(_) | Error::Io { .. } => 2,
        }
    }
}
