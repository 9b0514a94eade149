use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("missing hour in price series at {0}")]
    Gap(String),

    #[error("duplicate hour in price series at {0}")]
    Duplicate(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("index {index} out of range: {reason}")]
    OutOfRange { index: usize, reason: String },

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("episode already finished")]
    EpisodeFinished,

    #[error("shape mismatch: expected {expected}, got {got} ({context})")]
    ShapeMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("bad architecture: {0}")]
    BadArchitecture(String),

    #[error("not enough samples: have {have}, need {need}")]
    NotEnoughSamples { have: usize, need: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(expected: usize, got: usize, context: &'static str) -> Self {
        Error::ShapeMismatch { expected, got, context }
    }
}
