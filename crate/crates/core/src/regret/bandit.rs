use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use super::{NeighborObservation, RegretError, TrustWeights};

/// Selection rule behind [`BanditState::select_arm`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    #[default]
    Thompson,
    Ucb,
}

/// Beta belief about one Bernoulli arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmBelief {
    pub alpha: f64,
    pub beta: f64,
    /// Own pulls incorporated.
    pub pulls: u64,
    /// Sum of own rewards.
    pub reward_sum: f64,
    /// Total trust weight of peer observations incorporated.
    pub social_weight: f64,
}

impl ArmBelief {
    fn new(alpha: f64, beta: f64) -> Self {
        Self {
            alpha,
            beta,
            pulls: 0,
            reward_sum: 0.0,
            social_weight: 0.0,
        }
    }

    pub fn posterior_mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    /// Mean of own rewards, 0 before the first pull.
    pub fn empirical_mean(&self) -> f64 {
        if self.pulls == 0 {
            0.0
        } else {
            self.reward_sum / self.pulls as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditState {
    arms: Vec<ArmBelief>,
    policy: Policy,
    prior: (f64, f64),
    /// Peer observations dropped because their sender had no trust entry.
    ignored_observations: u64,
}

impl BanditState {
    /// `arms` arms, each starting from `Beta(1, 1)`.
    pub fn new(arms: usize, policy: Policy) -> Result<Self, RegretError> {
        Self::with_prior(arms, policy, 1.0, 1.0)
    }

    pub fn with_prior(arms: usize, policy: Policy, alpha: f64, beta: f64) -> Result<Self, RegretError> {
        if arms == 0 {
            return Err(RegretError::NoArms);
        }
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(RegretError::InvalidPrior(alpha, beta));
        }
        Ok(Self {
            arms: vec![ArmBelief::new(alpha, beta); arms],
            policy,
            prior: (alpha, beta),
            ignored_observations: 0,
        })
    }

    /// Builds a state from explicit `(alpha, beta)` beliefs.
    pub fn from_beliefs(beliefs: &[(f64, f64)], policy: Policy) -> Result<Self, RegretError> {
        if beliefs.is_empty() {
            return Err(RegretError::NoArms);
        }
        let arms = beliefs
            .iter()
            .map(|&(a, b)| {
                if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() {
                    Ok(ArmBelief::new(a, b))
                } else {
                    Err(RegretError::InvalidPrior(a, b))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            arms,
            policy,
            prior: (1.0, 1.0),
            ignored_observations: 0,
        })
    }

    pub fn arms(&self) -> &[ArmBelief] {
        &self.arms
    }

    pub fn arm(&self, arm: usize) -> Option<&ArmBelief> {
        self.arms.get(arm)
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn prior(&self) -> (f64, f64) {
        self.prior
    }

    pub fn ignored_observations(&self) -> u64 {
        self.ignored_observations
    }

    /// Chooses an arm; a pure function of the state and `seed`.
    pub fn select_arm(&self, seed: u64) -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.select_arm_with(&mut rng)
    }

    /// Thompson sampling draws one value per arm from its Beta belief and
    /// returns the argmax; UCB1 ignores `rng`. Ties go to the lowest index.
    pub fn select_arm_with<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let scores = match self.policy {
            Policy::Thompson => self
                .arms
                .iter()
                .map(|a| {
                    Beta::new(a.alpha, a.beta)
                        .expect("beliefs keep positive parameters")
                        .sample(rng)
                })
                .collect(),
            Policy::Ucb => self.ucb_scores(),
        };
        argmax(&scores)
    }

    fn ucb_scores(&self) -> Vec<f64> {
        let (a0, b0) = self.prior;
        let counts: Vec<f64> = self.arms.iter().map(|a| a.alpha + a.beta - a0 - b0).collect();
        let total: f64 = counts.iter().sum::<f64>() + 1.0;
        self.arms
            .iter()
            .zip(&counts)
            .map(|(a, &n)| {
                if n <= 0.0 {
                    f64::INFINITY
                } else {
                    a.posterior_mean() + (2.0 * total.ln() / n).sqrt()
                }
            })
            .collect()
    }

    /// Conjugate update with the agent's own reward.
    ///
    /// Bernoulli rewards are 0 or 1; fractional rewards in `[0, 1]` (split
    /// payoffs) enter as fractional pseudo-counts.
    pub fn update_own(&self, arm: usize, reward: f64) -> Result<Self, RegretError> {
        let mut next = self.clone();
        next.record_own(arm, reward)?;
        Ok(next)
    }

    pub fn record_own(&mut self, arm: usize, reward: f64) -> Result<(), RegretError> {
        check_reward(reward)?;
        let arms = self.arms.len();
        let belief = self.arms.get_mut(arm).ok_or(RegretError::InvalidArm { arm, arms })?;
        belief.alpha += reward;
        belief.beta += 1.0 - reward;
        belief.pulls += 1;
        belief.reward_sum += reward;
        Ok(())
    }

    /// Folds in peer observations as trust-weighted pseudo-counts.
    pub fn update_social(
        &self,
        observations: &[NeighborObservation],
        trust: &TrustWeights,
    ) -> Result<Self, RegretError> {
        let mut next = self.clone();
        next.record_social(observations, trust)?;
        Ok(next)
    }

    /// In-place form of [`update_social`](Self::update_social). All
    /// observations are validated before any is applied.
    pub fn record_social(
        &mut self,
        observations: &[NeighborObservation],
        trust: &TrustWeights,
    ) -> Result<(), RegretError> {
        let arms = self.arms.len();
        for obs in observations {
            if obs.arm >= arms {
                return Err(RegretError::InvalidArm { arm: obs.arm, arms });
            }
            check_reward(obs.reward)?;
        }
        for obs in observations {
            let Some(weight) = trust.weight(obs.agent) else {
                self.ignored_observations += 1;
                continue;
            };
            if weight == 0.0 {
                continue;
            }
            let belief = &mut self.arms[obs.arm];
            belief.alpha += weight * obs.reward;
            belief.beta += weight * (1.0 - obs.reward);
            belief.social_weight += weight;
        }
        Ok(())
    }
}

fn check_reward(reward: f64) -> Result<(), RegretError> {
    if (0.0..=1.0).contains(&reward) {
        Ok(())
    } else {
        Err(RegretError::InvalidReward(reward))
    }
}

pub(super) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
