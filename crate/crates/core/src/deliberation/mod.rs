//! Masked deliberation sessions.
//!
//! A [`Session`] collects ideas, assigns pairs for peer review, turns the
//! judgments into a [`CollectiveVoice`], and exposes tensions, contribution
//! rankings and decision matrices. Every state change goes through one
//! hash-chained [`SessionEvent`]; [`Session::replay`] rebuilds an identical
//! session from the log alone.

mod assignment;
mod decision;
mod events;
mod session;
mod views;
mod voice;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use assignment::{select_pair, Pair, PairPolicy};
pub use decision::{
    aggregate_scores, evaluate_decision_matrix, CountedJudgment, Criterion, CriterionInput, CriterionScores,
    DecisionInput, DecisionMatrix,
};
pub use events::{
    canonical_json, chain_hash, parse_jsonl, verify_chain, Event, EventKind, EventLog, LogError, LogFault,
    SessionEvent, GENESIS_HASH,
};
pub use session::{Assignment, ExportBundle, Idea, Session, TaskOutcome};
pub use views::{ContributorVoice, FacilitatorVoice, IdeaCard, ParticipantView, RankedIdea, TaskView, Viewer};
pub use voice::{surface_tensions, CollectiveVoice, Contribution, Tension, VoiceEntry, MIN_TENSION_JUDGMENTS};

use crate::judgment::{ItemId, JudgmentError, DEFAULT_PARTICLES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeliberationError {
    #[error("action not allowed in the {phase} phase")]
    Phase { phase: Phase },
    #[error("cannot move from {from} to {to}")]
    InvalidTransition { from: Phase, to: Phase },
    #[error("idea text must not be empty")]
    EmptyText,
    #[error("an idea with the same text already exists")]
    DuplicateIdea,
    #[error("unknown participant")]
    UnknownParticipant,
    #[error("participant id is already taken")]
    ParticipantExists,
    #[error("unknown item {0}")]
    UnknownItem(ItemId),
    #[error("winner and loser must differ")]
    DegenerateJudgment,
    #[error("judgment without assignment")]
    UnassignedPair,
    #[error("judgment already recorded for this assignment")]
    DuplicateJudgment,
    #[error("ranking available after convergence")]
    RankingUnavailable,
    #[error("invalid decision matrix: {0}")]
    InvalidDecision(String),
    #[error("criterion {0} does not cover the candidate set")]
    InconsistentCandidates(String),
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("missing session-created")]
    MissingSessionCreated,
    #[error("event {seq} cannot be applied: {reason}")]
    Replay { seq: u64, reason: String },
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Judgment(#[from] JudgmentError),
}

impl DeliberationError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Self::Phase { .. } => "phase_conflict",
            Self::InvalidTransition { .. } => "invalid_phase_transition",
            Self::EmptyText => "empty_text",
            Self::DuplicateIdea => "duplicate_idea",
            Self::UnknownParticipant => "unknown_participant",
            Self::ParticipantExists => "participant_exists",
            Self::UnknownItem(_) => "unknown_item",
            Self::DegenerateJudgment => "degenerate_pair",
            Self::UnassignedPair => "unassigned_pair",
            Self::DuplicateJudgment => "duplicate_judgment",
            Self::RankingUnavailable => "ranking_unavailable",
            Self::InvalidDecision(_) => "invalid_decision",
            Self::InconsistentCandidates(_) => "inconsistent_candidates",
            Self::InvalidConfig(_) => "invalid_config",
            Self::MissingSessionCreated => "missing_session_created",
            Self::Replay { .. } => "replay_failed",
            Self::Log(_) => "log_rejected",
            Self::Judgment(_) => "invalid_judgment",
        }
    }
}

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
    };
}

string_id!(
    /// Internal participant identifier; never shown to other contributors
    /// before the reveal phase.
    ParticipantId
);
string_id!(SessionId);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Contributor,
    Facilitator,
}

/// Session lifecycle; transitions only move forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Collecting,
    Reviewing,
    Converged,
    Revealed,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Collecting => "collecting",
            Phase::Reviewing => "reviewing",
            Phase::Converged => "converged",
            Phase::Revealed => "revealed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub id: ParticipantId,
    /// Display name with no derivation from the id.
    pub alias: String,
    pub role: Role,
    /// SHA-256 of the session id and the participant's bearer credential.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub credential_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    /// Base seed for every random stream in the session.
    pub seed: u64,
    pub particles: usize,
    /// Maximum number of task assignments.
    pub comparison_budget: u64,
    /// Judgments required before the session may converge on its own.
    pub min_judgments: u64,
    pub convergence_threshold: f64,
    pub convergence_window: usize,
    /// Log-strength random-walk step applied after every judgment.
    pub drift_sigma: f64,
    pub top_k: usize,
    pub policy: PairPolicy,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            particles: DEFAULT_PARTICLES,
            comparison_budget: 1000,
            min_judgments: 20,
            convergence_threshold: 0.9,
            convergence_window: 10,
            drift_sigma: 0.0,
            top_k: 3,
            policy: PairPolicy::Adaptive,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), DeliberationError> {
        let bad = |m: &str| Err(DeliberationError::InvalidConfig(m.to_owned()));
        if self.particles == 0 {
            return bad("particles must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.convergence_threshold) {
            return bad("convergence_threshold must lie in [0, 1]");
        }
        if self.convergence_window == 0 {
            return bad("convergence_window must be at least 1");
        }
        if !(self.drift_sigma.is_finite() && self.drift_sigma >= 0.0) {
            return bad("drift_sigma must be finite and non-negative");
        }
        if self.top_k == 0 {
            return bad("top_k must be at least 1");
        }
        Ok(())
    }
}
