//! Comparative judgment: pairwise preferences in, cardinal strengths out.
//!
//! The choice model is Bradley-Terry: item `i` is preferred over item `j`
//! with probability `v_i / (v_i + v_j)` for positive strengths `v`.
//! [`fit_scores`] computes the regularized maximum-likelihood strengths of a
//! [`ComparisonTally`]; [`ScorePosterior`] tracks a weighted particle
//! approximation of the Bayesian posterior and supports a log-strength random
//! walk between observations.

mod fit;
mod grid;
mod posterior;
mod tally;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fit::{fit, fit_scores, log_likelihood, FitOptions, FitReport, FittedScores};
pub use grid::{grid_search, GRID_MAX_ITEMS};
pub use posterior::{init_posterior, ScorePosterior, DEFAULT_PARTICLES};
pub use tally::ComparisonTally;

/// Default number of symmetric pseudo-wins added to every observed pair.
pub const DEFAULT_EPSILON: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JudgmentError {
    #[error("no comparisons")]
    NoComparisons,
    #[error("degenerate pair: {0} compared with itself")]
    DegeneratePair(ItemId),
    #[error("unknown item {0}")]
    UnknownItem(ItemId),
    #[error("at least one item is required")]
    NoItems,
    #[error("at least one particle is required")]
    NoParticles,
    #[error("k = {k} is out of range for {items} items")]
    KOutOfRange { k: usize, items: usize },
    #[error("epsilon must be finite and non-negative, got {0}")]
    InvalidEpsilon(f64),
    #[error("drift sigma must be finite and non-negative, got {0}")]
    InvalidSigma(f64),
    #[error("comparison graph is disconnected; strengths across components are not identifiable")]
    Disconnected,
    #[error("no finite maximum-likelihood estimate: some group of items never beats the rest (use epsilon > 0)")]
    NoFiniteMle,
    #[error("item {0} is already present")]
    DuplicateItem(ItemId),
    #[error("invalid particle set: {0}")]
    InvalidParticles(String),
}

/// Opaque identifier of an item under comparison.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(String);

impl ItemId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ItemId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for ItemId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

/// One reviewer's pairwise preference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub winner: ItemId,
    pub loser: ItemId,
}

impl Judgment {
    pub fn new(winner: impl Into<ItemId>, loser: impl Into<ItemId>) -> Self {
        Self {
            winner: winner.into(),
            loser: loser.into(),
        }
    }
}

/// Positive strengths that sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScoreVector(BTreeMap<ItemId, f64>);

impl ScoreVector {
    /// Normalizes raw positive strengths.
    pub fn from_strengths<I, K>(strengths: I) -> Result<Self, JudgmentError>
    where
        I: IntoIterator<Item = (K, f64)>,
        K: Into<ItemId>,
    {
        let mut map = BTreeMap::new();
        for (id, v) in strengths {
            let id = id.into();
            if !(v.is_finite() && v > 0.0) {
                return Err(JudgmentError::InvalidParticles(format!(
                    "strength of {id} must be positive and finite, got {v}"
                )));
            }
            if map.insert(id.clone(), v).is_some() {
                return Err(JudgmentError::DuplicateItem(id));
            }
        }
        if map.is_empty() {
            return Err(JudgmentError::NoItems);
        }
        let total: f64 = map.values().sum();
        map.values_mut().for_each(|v| *v /= total);
        Ok(Self(map))
    }

    pub fn get(&self, item: &ItemId) -> Option<f64> {
        self.0.get(item).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ItemId, f64)> {
        self.0.iter().map(|(k, v)| (k, *v))
    }

    pub fn items(&self) -> impl Iterator<Item = &ItemId> {
        self.0.keys()
    }

    pub fn as_map(&self) -> &BTreeMap<ItemId, f64> {
        &self.0
    }

    /// Items ordered by descending strength, ties by id.
    pub fn ranking(&self) -> Vec<ItemId> {
        let mut items: Vec<(&ItemId, f64)> = self.iter().collect();
        items.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        items.into_iter().map(|(id, _)| id.clone()).collect()
    }

    /// Bradley-Terry probability that `i` is preferred over `j`.
    pub fn win_probability(&self, i: &ItemId, j: &ItemId) -> Result<f64, JudgmentError> {
        win_probability(self, i, j)
    }
}

/// Bradley-Terry probability that `i` is preferred over `j`: `v_i / (v_i + v_j)`.
pub fn win_probability(scores: &ScoreVector, i: &ItemId, j: &ItemId) -> Result<f64, JudgmentError> {
    if i == j {
        return Err(JudgmentError::DegeneratePair(i.clone()));
    }
    let vi = scores.get(i).ok_or_else(|| JudgmentError::UnknownItem(i.clone()))?;
    let vj = scores.get(j).ok_or_else(|| JudgmentError::UnknownItem(j.clone()))?;
    Ok(vi / (vi + vj))
}
