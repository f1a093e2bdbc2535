//! Multi-criteria decision model over candidate ideas.
//!
//! Each criterion gets its own Bradley-Terry fit from per-criterion pairwise
//! judgments; a candidate's probability of success is the weighted mean of
//! its per-criterion strengths, renormalized across candidates.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::DeliberationError;
use crate::judgment::{fit_scores, ComparisonTally, ItemId, ScoreVector, DEFAULT_EPSILON};

const WEIGHT_TOLERANCE: f64 = 1e-9;

/// Pairwise counts as they arrive over the wire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountedJudgment {
    pub winner: ItemId,
    pub loser: ItemId,
    #[serde(default = "one")]
    pub count: u64,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionInput {
    pub name: String,
    pub weight: f64,
    #[serde(default)]
    pub judgments: Vec<CountedJudgment>,
}

/// Everything needed to evaluate a decision matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionInput {
    pub candidates: Vec<ItemId>,
    pub criteria: Vec<CriterionInput>,
    #[serde(default)]
    pub epsilon: Option<f64>,
}

impl DecisionInput {
    pub fn evaluate(&self) -> Result<DecisionMatrix, DeliberationError> {
        let criteria = self
            .criteria
            .iter()
            .map(|c| {
                let mut tally = ComparisonTally::new();
                for j in &c.judgments {
                    tally.add_wins(&j.winner, &j.loser, j.count)?;
                }
                Ok(Criterion {
                    name: c.name.clone(),
                    weight: c.weight,
                    tally,
                })
            })
            .collect::<Result<Vec<_>, DeliberationError>>()?;
        evaluate_decision_matrix(&self.candidates, &criteria, self.epsilon.unwrap_or(DEFAULT_EPSILON))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub name: String,
    pub weight: f64,
    pub tally: ComparisonTally,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionScores {
    pub name: String,
    pub weight: f64,
    pub scores: ScoreVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionMatrix {
    pub candidates: Vec<ItemId>,
    pub criteria: Vec<CriterionScores>,
    /// Probability of success per candidate; sums to one.
    pub aggregate: BTreeMap<ItemId, f64>,
}

impl DecisionMatrix {
    /// Candidates by descending aggregate score, ties by id.
    pub fn ranking(&self) -> Vec<(ItemId, f64)> {
        let mut r: Vec<_> = self.aggregate.iter().map(|(k, v)| (k.clone(), *v)).collect();
        r.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        r
    }
}

pub fn evaluate_decision_matrix(
    candidates: &[ItemId],
    criteria: &[Criterion],
    epsilon: f64,
) -> Result<DecisionMatrix, DeliberationError> {
    let invalid = |m: String| Err(DeliberationError::InvalidDecision(m));
    let set: BTreeSet<&ItemId> = candidates.iter().collect();
    if set.is_empty() {
        return invalid("at least one candidate is required".into());
    }
    if set.len() != candidates.len() {
        return invalid("candidates must be distinct".into());
    }
    if criteria.is_empty() {
        return invalid("at least one criterion is required".into());
    }
    if criteria.iter().any(|c| !(c.weight.is_finite() && c.weight >= 0.0)) {
        return invalid("criterion weights must be non-negative".into());
    }
    let total: f64 = criteria.iter().map(|c| c.weight).sum();
    if (total - 1.0).abs() > WEIGHT_TOLERANCE {
        return invalid(format!("criterion weights sum to {total}, not 1"));
    }

    let mut scored = Vec::with_capacity(criteria.len());
    for c in criteria {
        let covered = c.tally.items();
        let scores = if candidates.len() == 1 && covered.is_empty() {
            ScoreVector::from_strengths([(candidates[0].clone(), 1.0)])?
        } else {
            if covered.iter().collect::<BTreeSet<_>>() != set {
                return Err(DeliberationError::InconsistentCandidates(c.name.clone()));
            }
            fit_scores(&c.tally, epsilon)?
        };
        scored.push(CriterionScores {
            name: c.name.clone(),
            weight: c.weight,
            scores,
        });
    }

    let weighted: Vec<(f64, &ScoreVector)> = scored.iter().map(|c| (c.weight, &c.scores)).collect();
    let aggregate = aggregate_scores(candidates, &weighted);
    Ok(DecisionMatrix {
        candidates: candidates.to_vec(),
        criteria: scored,
        aggregate,
    })
}

/// Weighted arithmetic mean of per-criterion strengths, renormalized to sum 1.
pub fn aggregate_scores(candidates: &[ItemId], weighted: &[(f64, &ScoreVector)]) -> BTreeMap<ItemId, f64> {
    let raw: Vec<f64> = candidates
        .iter()
        .map(|id| weighted.iter().map(|(w, s)| w * s.get(id).unwrap_or(0.0)).sum())
        .collect();
    let total: f64 = raw.iter().sum();
    candidates
        .iter()
        .cloned()
        .zip(raw.into_iter().map(|x| x / total))
        .collect()
}
