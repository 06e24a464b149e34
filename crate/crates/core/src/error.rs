//! Error type shared by the whole engine.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("rule base too large: {requested} rules exceed the limit of {limit}")]
    Capacity { requested: u128, limit: u128 },

    /// Every rule fired at exactly zero strength, so normalization is
    /// undefined. Reachable under the product T-norm (and a fixed softmin)
    /// in high dimension; the adaptive softmin never produces it.
    #[error("degenerate firing: all rule firing strengths are zero")]
    DegenerateFiring,

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("training diverged in the {phase} phase: loss became non-finite at iteration {iteration}")]
    TrainingDiverged {
        phase: &'static str,
        iteration: usize,
    },

    #[error("parse error in {path} at {location}: {message}")]
    Parse {
        path: String,
        location: String,
        message: String,
    },
}

impl Error {
    pub(crate) fn parse(path: &str, location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_string(),
            location: location.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
