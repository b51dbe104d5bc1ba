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

    #[error("read error: {0}")]
    Read(#[from] std::io::Error),

    /// Input data violates its format; `line` is 1-based.
    #[error("{what} line {line}: {message}")]
    Parse {
        what: &'static str,
        line: usize,
        message: String,
    },

    #[error("invalid data: {0}")]
    Invalid(String),

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("backward: {0}")]
    Backward(String),

    #[error("id {id} out of range (limit {limit})")]
    IdOutOfRange { id: usize, limit: usize },

    #[error("subgraph: {0}")]
    Subgraph(String),

    #[error("prompt: {0}")]
    Prompt(String),

    #[error("config: {0}")]
    Config(String),

    #[error("training diverged at batch {batch} (epoch {epoch}): {reason}")]
    Divergence {
        epoch: usize,
        batch: usize,
        reason: String,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(what: &'static str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            what,
            line,
            message: message.into(),
        }
    }

    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    /// Short machine-readable category used by the command-line front end.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } | Error::Read(_) => "io",
            Error::Parse { .. } => "parse",
            Error::Invalid(_) => "invalid",
            Error::Shape { .. } => "shape",
            Error::NonFinite { .. } => "non_finite",
            Error::Backward(_) => "backward",
            Error::IdOutOfRange { .. } => "id_out_of_range",
            Error::Subgraph(_) => "subgraph",
            Error::Prompt(_) => "prompt",
            Error::Config(_) => "config",
            Error::Divergence { .. } => "divergence",
            Error::Checkpoint(_) => "checkpoint",
            Error::Json(_) => "json",
        }
    }
}
