//! Engine for pairwise-judgment deliberation.
//!
//! * [`judgment`] turns pairwise preferences into cardinal Bradley-Terry
//!   strengths, either as a static maximum-likelihood fit or as a particle
//!   posterior that can follow drifting preferences.
//! * [`regret`] holds the Thompson-sampling bandit machinery, cooperative
//!   observation sharing, collision splitting and the social-learning belief.
//! * [`deliberation`] runs masked sessions on top of both, with every state
//!   change recorded in a hash-chained event log that replays bit for bit.

pub mod deliberation;
pub mod judgment;
pub mod regret;
pub mod rng;

pub use deliberation::{CollectiveVoice, DeliberationError, Phase, Session, SessionConfig, SessionEvent};
pub use judgment::{fit_scores, ComparisonTally, ItemId, JudgmentError, ScorePosterior, ScoreVector};
pub use regret::{BanditState, RegretError};
