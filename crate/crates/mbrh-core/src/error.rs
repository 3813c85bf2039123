//! Error type shared by the library and the CLI.
//!
//! The three variants map onto the CLI process exit codes: configuration
//! errors exit with 2, numerical failures with 3, and I/O problems with 4.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or arguments (CLI exit code 2).
    #[error("configuration error: {0}")]
    Config(String),
    /// Numerical failure such as an ill-conditioned linear system or a
    /// quadrature that cannot reach its target (CLI exit code 3).
    #[error("numerical error: {0}")]
    Numerical(String),
    /// File-system or serialization failure (CLI exit code 4).
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn io(msg: impl Into<String>) -> Self {
        Error::Io(msg.into())
    }

    /// Process exit code the CLI uses for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Numerical(_) => 3,
            Error::Io(_) => 4,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
