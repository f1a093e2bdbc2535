//! Simulated judges with a known ground truth.

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::SimError;

/// A judge whose choices follow the Bradley-Terry probabilities of a fixed
/// latent strength vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticAgent {
    pub id: u32,
    truth: Vec<f64>,
}

impl SyntheticAgent {
    /// `truth` must be positive; it is normalized to sum to one.
    pub fn new(id: u32, truth: &[f64]) -> Result<Self, SimError> {
        Ok(Self {
            id,
            truth: normalize(truth)?,
        })
    }

    pub fn truth(&self) -> &[f64] {
        &self.truth
    }

    /// Whether the agent prefers item `i` over item `j` on this draw.
    pub fn prefers<R: Rng + ?Sized>(&self, i: usize, j: usize, rng: &mut R) -> bool {
        let p = self.truth[i] / (self.truth[i] + self.truth[j]);
        rng.random::<f64>() < p
    }
}

/// Normalizes positive finite strengths to sum to one.
pub fn normalize(strengths: &[f64]) -> Result<Vec<f64>, SimError> {
    if strengths.is_empty() || strengths.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(SimError::InvalidTruth);
    }
    let total: f64 = strengths.iter().sum();
    Ok(strengths.iter().map(|v| v / total).collect())
}

/// Log-normal(0, 1) strengths, normalized.
pub fn random_truth<R: Rng + ?Sized>(items: usize, rng: &mut R) -> Vec<f64> {
    let dist = LogNormal::new(0.0, 1.0).expect("valid parameters");
    let raw: Vec<f64> = (0..items).map(|_| dist.sample(rng)).collect();
    normalize(&raw).expect("log-normal draws are positive")
}
