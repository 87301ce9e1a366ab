use std::process::ExitCode;

use wolbachia_core::{Condition, Error as CoreError};

/// Failure of a command or request, grouped by who has to act on it.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    /// Unreadable file, malformed JSON, bad arguments.
    #[error("input error: {0}")]
    Input(String),
    /// Parameters or states outside the model's assumptions.
    #[error("validation failed: {message}")]
    Validation { message: String, violated: Vec<Condition> },
    /// The numerics did not deliver an answer.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl AppError {
    pub fn input(e: impl std::fmt::Display) -> Self {
        AppError::Input(e.to_string())
    }

    pub fn validation(message: impl Into<String>) -> Self {
        AppError::Validation { message: message.into(), violated: Vec::new() }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }

    pub fn code(&self) -> u8 {
        match self {
            AppError::Input(_) => 1,
            AppError::Validation { .. } => 2,
            AppError::Numerical(_) => 3,
        }
    }

    /// Stable machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            AppError::Input(_) => "invalid_input",
            AppError::Validation { .. } => "validation_failed",
            AppError::Numerical(_) => "numerical_failure",
        }
    }
}

impl From<CoreError> for AppError {
    fn from(e: CoreError) -> Self {
        use CoreError::*;
        match e {
            NegativeState { .. }
            | SingularAtOrigin
            | NonPositiveParameter(_)
            | NotSurvivable
            | NoCoexistence
            | NotSaddle
            | InvalidOptions(_)
            | InvalidSchedule(_) => AppError::validation(e.to_string()),
            _ => AppError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::input(e)
    }
}

pub type AppResult<T> = Result<T, AppError>;
