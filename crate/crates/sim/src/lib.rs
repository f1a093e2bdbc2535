//! Simulation harness for the deliberation engine.
//!
//! Synthetic agents with a known ground truth drive complete sessions
//! through the public session API, so every simulation doubles as an
//! end-to-end test; bandit experiments and offline fitting are exposed for
//! the `gci` command-line tool.

pub mod agent;
pub mod metrics;
pub mod offline;
pub mod session;

use thiserror::Error;

pub use agent::SyntheticAgent;
pub use metrics::{kendall_tau, Summary};
pub use offline::{fit_csv, parse_bandit_config, read_comparisons, regret_csv, run_bandit};
pub use session::{run_session, run_session_experiment, SessionReport, SessionRun, SessionSimConfig};

#[derive(Debug, Error)]
pub enum SimError {
    /// Bad flags or config; a usage error.
    #[error("{0}")]
    InvalidConfig(String),
    #[error("ground truth must be non-empty, positive and finite")]
    InvalidTruth,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Judgment(#[from] gci_core::JudgmentError),
    #[error(transparent)]
    Regret(#[from] gci_core::RegretError),
    #[error(transparent)]
    Deliberation(#[from] gci_core::DeliberationError),
}

impl SimError {
    /// Process exit code: 2 for usage errors, 1 for data errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::InvalidConfig(_) | SimError::InvalidTruth => 2,
            _ => 1,
        }
    }
}
