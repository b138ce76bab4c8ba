use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("gradient entry {index} is not finite")]
    NonFinite { index: usize },

    #[error("quantization level count must be at least 1")]
    ZeroLevels,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vehicle coincides with the base station; path loss is singular")]
    ZeroDistance,

    #[error("transmission rate is zero; upload delay is infinite")]
    InfiniteDelay,

    #[error("replay buffer holds {have} transitions, need {need}")]
    NotReady { have: usize, need: usize },

    #[error("Q-network loss became non-finite ({loss}) at training step {step}")]
    NonFiniteLoss { loss: f64, step: u64 },

    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("failed to parse config {path}: {source}")]
    ConfigParse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("round {round}, vehicle {vehicle}: {source}")]
    Round {
        round: u64,
        vehicle: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config { key: key.into(), msg: msg.into() }
    }

    pub(crate) fn in_round(self, round: u64, vehicle: usize) -> Self {
        Error::Round { round, vehicle, source: Box::new(self) }
    }
}
