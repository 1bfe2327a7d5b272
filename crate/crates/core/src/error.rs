use std::fmt;

/// Errors surfaced by the library. Hot inner loops use assertions for
/// programmer errors; `Error` covers conditions a caller can hit with
/// well-formed code but bad inputs (CLI args, config files, task specs,
/// runaway numerics).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: String },

    #[error("unknown task `{0}` (see `list` for available tasks)")]
    UnknownTask(String),

    #[error("unknown method `{0}` (see `list` for available methods)")]
    UnknownMethod(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("checkpoint format: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn non_finite(context: impl fmt::Display) -> Self {
        Error::NonFinite {
            context: context.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
