// SPDX-License-Identifier: MIT OR Apache-2.0

use erasure_core::Error as CoreError;

/// Failure of a run, split by exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments, configuration or inputs; exit status 1.
    #[error("{0}")]
    Validation(String),
    /// Failure while doing the work; exit status 2.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    pub fn status(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation_error",
            CliError::Runtime(_) => "runtime_error",
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::MissingProbe { layer, offset } => {
                CliError::Validation(format!("missing probe for (layer {layer}, offset {offset})"))
            }
            CoreError::Config(_)
            | CoreError::InvalidOffset(_)
            | CoreError::MissingLayer { .. }
            | CoreError::Annotation(_)
            | CoreError::DocMismatch(_) => CliError::Validation(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn validation(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

pub fn runtime(msg: impl Into<String>) -> CliError {
    CliError::Runtime(msg.into())
}
