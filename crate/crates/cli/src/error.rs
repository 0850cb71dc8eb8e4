use serde_json::json;
use skg_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid configuration; exit status 2.
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    /// An invariant tripped while running; exit status 3.
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Verification(_) => 3,
        }
    }

    /// Machine-readable form written to standard error.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            CliError::Config(messages) => json!({"error": {"kind": "config", "messages": messages}}),
            CliError::Verification(message) => json!({"error": {"kind": "verification", "messages": [message]}}),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Verification(_)
            | CoreError::OracleDisagreement { .. }
            | CoreError::GeneratorFailed { .. }
            | CoreError::ReconciliationFailed { .. }
            | CoreError::NotFullRowRank { .. } => CliError::Verification(e.to_string()),
            _ => CliError::Config(vec![e.to_string()]),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(vec![format!("output: {e}")])
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Config(vec![format!("output: {e}")])
    }
}
