use serde::{Deserialize, Serialize};

use super::RegretError;

/// Belief that an unfamiliar option is worth adopting, updated in odds form:
/// every excited observation multiplies the prior odds by the same
/// likelihood ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialBelief {
    prior: f64,
    likelihood_ratio: f64,
    observations: u64,
    posterior: f64,
}

impl SocialBelief {
    pub fn new(prior: f64, likelihood_ratio: f64) -> Result<Self, RegretError> {
        if !(prior > 0.0 && prior < 1.0) {
            return Err(RegretError::InvalidPriorProbability(prior));
        }
        if !(likelihood_ratio > 0.0 && likelihood_ratio.is_finite()) {
            return Err(RegretError::InvalidLikelihoodRatio(likelihood_ratio));
        }
        Ok(Self {
            prior,
            likelihood_ratio,
            observations: 0,
            posterior: prior,
        })
    }

    pub fn prior(&self) -> f64 {
        self.prior
    }

    pub fn likelihood_ratio(&self) -> f64 {
        self.likelihood_ratio
    }

    pub fn observations(&self) -> u64 {
        self.observations
    }

    pub fn posterior(&self) -> f64 {
        self.posterior
    }

    /// Posterior odds `p / (1 - p)`.
    pub fn posterior_odds(&self) -> f64 {
        self.log_odds().exp()
    }

    /// Whether the evidence has tipped the belief past even odds.
    pub fn adopts(&self) -> bool {
        self.posterior > 0.5
    }

    /// Adds `excited` observations. The posterior is recomputed from the
    /// accumulated count, so splitting a batch never changes the result.
    pub fn social_update(&self, excited: u64) -> Self {
        let mut next = self.clone();
        next.observations += excited;
        next.posterior = if next.observations == 0 {
            next.prior
        } else {
            logistic(next.log_odds())
        };
        next
    }

    fn log_odds(&self) -> f64 {
        (self.prior / (1.0 - self.prior)).ln() + self.observations as f64 * self.likelihood_ratio.ln()
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
