//! Minimum-regret action selection.
//!
//! Single agents keep a Beta belief per Bernoulli arm and choose by Thompson
//! sampling (or UCB1 for comparison). Cooperative agents additionally fold in
//! trust-weighted observations from peers, split payoffs when they collide on
//! an arm, and pick whom to trust by how often their past choices agreed.
//! [`SocialBelief`] is the odds-form Bayesian update behind "most of the hive
//! follows once enough scouts come back excited".

mod bandit;
mod cooperation;
mod experiment;
mod social;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bandit::{ArmBelief, BanditState, Policy};
pub use cooperation::{
    agreement, resolve_collisions, select_trust_subset, top_k_trust, NeighborObservation, TrustWeights,
};
pub use experiment::{run_regret_experiment, EpochRecord, ExperimentConfig, ExperimentResult};
pub use social::SocialBelief;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegretError {
    #[error("a bandit needs at least one arm")]
    NoArms,
    #[error("arm {arm} is out of range for {arms} arms")]
    InvalidArm { arm: usize, arms: usize },
    #[error("reward {0} is outside [0, 1]")]
    InvalidReward(f64),
    #[error("invalid prior: alpha and beta must be positive, got ({0}, {1})")]
    InvalidPrior(f64, f64),
    #[error("trust weight {weight} for agent {agent} is outside [0, 1]")]
    InvalidTrust { agent: AgentId, weight: f64 },
    #[error("choice histories have mismatched lengths: expected {expected}, agent {agent} has {actual}")]
    HistoryLength {
        agent: AgentId,
        expected: usize,
        actual: usize,
    },
    #[error("choice histories must contain at least one epoch")]
    EmptyHistory,
    #[error("cannot trust {k} agents out of {available}")]
    TrustSubsetTooLarge { k: usize, available: usize },
    #[error("no payoff recorded for chosen arm {0}")]
    MissingPayoff(usize),
    #[error("prior probability must lie strictly between 0 and 1, got {0}")]
    InvalidPriorProbability(f64),
    #[error("likelihood ratio must be positive and finite, got {0}")]
    InvalidLikelihoodRatio(f64),
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
}

/// Identifier of a learning agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u32);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
