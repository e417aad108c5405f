//! Experiment harness: model/instance JSON formats, instance generators,
//! batch Monte Carlo execution with deterministic per-trial seeding,
//! analytics reports, and grid-search tuning.

pub mod instances;
pub mod model_json;
pub mod predict;
pub mod runner;
pub mod tune;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Configuration or input-file problems; CLI exit code 2.
    #[error("config error: {0}")]
    Config(String),
    /// Failures during execution; CLI exit code 3.
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl HarnessError {
    pub fn config(msg: impl Into<String>) -> Self {
        HarnessError::Config(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        HarnessError::Runtime(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Runtime(_) => 3,
        }
    }
}
