use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid search space: {0}")]
    InvalidSpace(String),

    #[error("configuration does not match search space: {0}")]
    ConfigMismatch(String),

    #[error("invalid tuner parameters: {0}")]
    InvalidTuner(String),

    #[error("level {level} out of range 1..={levels}")]
    LevelOutOfRange { level: usize, levels: usize },

    #[error("configuration {config_id} already promoted from level {level}")]
    AlreadyPromoted { config_id: u64, level: usize },

    #[error("no fitted surrogate available")]
    ColdStart,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error("invalid experiment setup: {0}")]
    Setup(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
