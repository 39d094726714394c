//! Command-line front end: scenario loading and the five subcommands, each
//! emitting CSV and JSON for external plotting.

pub mod app;
pub mod check;
pub mod commands;
pub mod csv;
pub mod scenario;

pub use check::{cmd_check, CheckReport, PropertyResult};
pub use commands::{
    cmd_ensemble, cmd_exit_time, cmd_exponent, cmd_simulate, EnsembleReport, ExitReport, ExponentSource,
    ExponentSummary,
};
pub use scenario::{LawChoice, Resolved, Scenario};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("integration blew up: {0}")]
    Blowup(qfeedback::Error),
    #[error("exponent fit failed: {0}")]
    Exponent(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Process exit code: 2 for configuration errors, 3 for blowups, 4 for
    /// failed exponent fits, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Blowup(_) => 3,
            CliError::Exponent(_) => 4,
            CliError::Io(_) | CliError::Json(_) => 1,
        }
    }
}

impl From<qfeedback::Error> for CliError {
    fn from(e: qfeedback::Error) -> Self {
        use qfeedback::Error as E;
        match e {
            E::Blowup { .. } => CliError::Blowup(e),
            E::TooFewSamples(_) => CliError::Exponent(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}
