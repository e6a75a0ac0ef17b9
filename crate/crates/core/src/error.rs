use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by schemes, solvers, and dataset I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument is out of range or structurally wrong.
    #[error("invalid input: {0}")]
    Input(String),

    /// The dataset document could not be parsed.
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    /// The dataset is too corrupted to correct within the scheme's caps.
    #[error("correction failure: {0}")]
    CorrectionFailure(String),

    /// Experiment configuration rejected before any trial ran.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
