//! Experiment orchestration for the `qauth` binary: seeded batch simulation,
//! CSV and JSON emission, and transcript replay.

pub mod commands;
pub mod config;
pub mod simulate;

use std::path::Path;

use qauth_core::adversary::AdversaryError;
use qauth_core::analysis::AnalysisError;
use qauth_core::hepuf::HepufError;
use qauth_core::protocol::ProtocolError;
use qauth_core::puf::PufError;
use qauth_core::transcript::TranscriptError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    /// An input file that exists but cannot be parsed.
    #[error("{path}: {reason}")]
    Input { path: String, reason: String },
    #[error("invariant violation: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io { .. } | CliError::Input { .. } => 2,
            CliError::Invariant(_) => 3,
        }
    }
}

// Core errors surface from parameters the validator let through, so they
// are reported as configuration errors.
macro_rules! config_error_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Config(e.to_string())
            }
        }
    )*};
}

config_error_from!(AdversaryError, AnalysisError, HepufError, ProtocolError, PufError);

impl From<TranscriptError> for CliError {
    fn from(e: TranscriptError) -> Self {
        CliError::Io {
            path: "transcript".into(),
            reason: e.to_string(),
        }
    }
}
