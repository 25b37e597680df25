use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the estimation pipeline and its file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The constrained cluster search found no branch with at least one mapped cluster.
    #[error("no cluster subset satisfies the model constraints")]
    NoSolution,

    /// No hypothesis satisfied the inter-plane constraints: either the model cannot be
    /// obtained from these data or the pre-clustering is wrong.
    #[error("no plane set satisfying the model constraints was found")]
    ErrorStatus,

    #[error("{}:{line}: {message}", path.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "<input>".into()))]
    Parse {
        path: Option<PathBuf>,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: None,
            line,
            message: message.into(),
        }
    }

    /// Attach a file path to a parse error.
    pub fn with_path(self, path: impl Into<PathBuf>) -> Self {
        match self {
            Error::Parse { line, message, .. } => Error::Parse {
                path: Some(path.into()),
                line,
                message,
            },
            other => other,
        }
    }

    /// True for the two "model unreachable" outcomes.
    pub fn is_model_unreachable(&self) -> bool {
        matches!(self, Error::NoSolution | Error::ErrorStatus)
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
