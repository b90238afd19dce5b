use thiserror::Error;

use crate::simcore::RunRecord;

pub type Result<T> = std::result::Result<T, ArenaError>;

#[derive(Debug, Error)]
pub enum ArenaError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("event budget of {cap} exceeded before the stop rule was met")]
    BudgetExceeded { cap: u64, partial: Box<RunRecord> },
    #[error("no pending events and the stop rule was not met")]
    Stalled { partial: Box<RunRecord> },
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl ArenaError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        ArenaError::InvalidArgument(msg.into())
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            ArenaError::InvalidArgument(_) => "invalid_argument",
            ArenaError::Unsupported(_) => "unsupported",
            ArenaError::Config(_) => "config",
            ArenaError::BudgetExceeded { .. } => "budget_exceeded",
            ArenaError::Stalled { .. } => "stalled",
            ArenaError::Verification(_) => "verification",
            ArenaError::Io(_) => "io",
            ArenaError::Csv(_) => "csv",
            ArenaError::Json(_) => "json",
        }
    }

    /// Process exit status used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            ArenaError::BudgetExceeded { .. } | ArenaError::Stalled { .. } => 3,
            ArenaError::Verification(_) => 4,
            ArenaError::Io(_) | ArenaError::Csv(_) | ArenaError::Json(_) => 1,
            _ => 2,
        }
    }
}
