use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// Variants are grouped by category so that the command-line front end can
/// map each one onto a distinct exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("structural error: {0}")]
    Structure(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("ingestion error at line {line}: {msg}")]
    Ingest { line: usize, msg: String },

    #[error("missing artifact: {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("format error: {0}")]
    Format(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for this error category.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::MissingArtifact(_) => 3,
            Error::Divergence { .. } => 4,
            Error::Structure(_) | Error::Domain(_) => 5,
            Error::Ingest { .. } | Error::Format(_) => 6,
            // a truncated artifact is a format problem, not an I/O failure
            Error::Io(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => 6,
            Error::Verification(_) => 7,
            Error::Io(_) => 8,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
