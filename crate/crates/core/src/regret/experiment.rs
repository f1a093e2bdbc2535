//! Lock-step simulation of one or more bandit agents.
//!
//! Each epoch every agent selects an arm, payoffs are drawn (and split on
//! collisions when enabled), agents update on their own reward, and with
//! sharing on each agent folds in the other agents' rewards weighted by a
//! top-k trust subset chosen from choice agreement so far.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{resolve_collisions, top_k_trust, AgentId, BanditState, NeighborObservation, Policy, RegretError};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// True Bernoulli mean of every arm.
    pub means: Vec<f64>,
    #[serde(default = "one")]
    pub agents: usize,
    pub horizon: usize,
    #[serde(default)]
    pub sharing: bool,
    #[serde(default)]
    pub collisions: bool,
    /// Peers each agent trusts when sharing; defaults to all of them.
    #[serde(default)]
    pub trust_k: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub policy: Policy,
}

fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn new(means: Vec<f64>, agents: usize, horizon: usize, seed: u64) -> Self {
        Self {
            means,
            agents,
            horizon,
            sharing: false,
            collisions: false,
            trust_k: None,
            seed,
            policy: Policy::Thompson,
        }
    }

    pub fn validate(&self) -> Result<(), RegretError> {
        let bad = |m: &str| Err(RegretError::InvalidConfig(m.to_owned()));
        if self.means.is_empty() {
            return bad("at least one arm mean is required");
        }
        if self.means.iter().any(|m| !(0.0..=1.0).contains(m)) {
            return bad("arm means must lie in [0, 1]");
        }
        if self.agents == 0 {
            return bad("at least one agent is required");
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1");
        }
        if let Some(k) = self.trust_k {
            if k > self.agents - 1 {
                return bad("trust_k exceeds the number of peers");
            }
        }
        Ok(())
    }
}

/// One agent's step: `epoch` is 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub agent: u32,
    pub arm: usize,
    pub reward: f64,
    pub cum_regret: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    /// Epoch-major: all agents of epoch 1, then epoch 2, ...
    pub records: Vec<EpochRecord>,
    /// Whether two or more agents picked the same arm, per epoch.
    pub collided: Vec<bool>,
}

impl ExperimentResult {
    /// Cumulative regret of `agent` after each epoch.
    pub fn cumulative_regret(&self, agent: usize) -> Vec<f64> {
        self.records
            .iter()
            .skip(agent)
            .step_by(self.config.agents)
            .map(|r| r.cum_regret)
            .collect()
    }

    /// Cumulative regret of every agent at the end of the horizon.
    pub fn final_regret(&self) -> Vec<f64> {
        let tail = self.records.len() - self.config.agents;
        self.records[tail..].iter().map(|r| r.cum_regret).collect()
    }

    pub fn mean_final_regret(&self) -> f64 {
        let f = self.final_regret();
        f.iter().sum::<f64>() / f.len() as f64
    }

    /// Fraction of the last `epochs` epochs in which some arm was shared.
    pub fn collision_rate(&self, epochs: usize) -> f64 {
        let window = &self.collided[self.collided.len().saturating_sub(epochs)..];
        window.iter().filter(|c| **c).count() as f64 / window.len() as f64
    }
}

pub fn run_regret_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, RegretError> {
    config.validate()?;
    let arms = config.means.len();
    let agents = config.agents;
    let best = config.means.iter().copied().fold(f64::MIN, f64::max);
    let trust_k = config.trust_k.unwrap_or(agents - 1);

    let mut states = vec![BanditState::new(arms, config.policy)?; agents];
    let mut choosers: Vec<_> = (0..agents)
        .map(|a| rng::stream(config.seed, &[b"agent", &(a as u64).to_le_bytes()]))
        .collect();
    let mut env = rng::stream(config.seed, &[b"env"]);
    let mut agree = vec![vec![0u64; agents]; agents];
    let mut cum = vec![0.0; agents];

    let mut records = Vec::with_capacity(config.horizon * agents);
    let mut collided = Vec::with_capacity(config.horizon);
    for epoch in 1..=config.horizon as u64 {
        let choices: Vec<usize> = states
            .iter()
            .zip(choosers.iter_mut())
            .map(|(s, r)| s.select_arm_with(r))
            .collect();

        let mut crowd = vec![0usize; arms];
        choices.iter().for_each(|&c| crowd[c] += 1);
        collided.push(crowd.iter().any(|&m| m > 1));

        let rewards: Vec<f64> = if config.collisions {
            let mut payoffs = BTreeMap::new();
            for (arm, _) in crowd.iter().enumerate().filter(|(_, m)| **m > 0) {
                payoffs.insert(arm, bernoulli(&mut env, config.means[arm]));
            }
            let chosen: BTreeMap<AgentId, usize> = choices
                .iter()
                .enumerate()
                .map(|(a, c)| (AgentId(a as u32), *c))
                .collect();
            let split = resolve_collisions(&chosen, &payoffs)?;
            (0..agents).map(|a| split[&AgentId(a as u32)]).collect()
        } else {
            choices.iter().map(|&c| bernoulli(&mut env, config.means[c])).collect()
        };

        for a in 0..agents {
            states[a].record_own(choices[a], rewards[a])?;
            cum[a] += best - config.means[choices[a]];
            records.push(EpochRecord {
                epoch,
                agent: a as u32,
                arm: choices[a],
                reward: rewards[a],
                cum_regret: cum[a],
            });
        }

        if config.sharing && agents > 1 {
            for a in 0..agents {
                for b in 0..agents {
                    if choices[a] == choices[b] {
                        agree[a][b] += 1;
                    }
                }
            }
            let observations: Vec<NeighborObservation> = (0..agents)
                .map(|a| NeighborObservation {
                    agent: AgentId(a as u32),
                    arm: choices[a],
                    reward: rewards[a],
                    epoch,
                })
                .collect();
            for a in 0..agents {
                let me = AgentId(a as u32);
                let scores = (0..agents)
                    .filter(|&b| b != a)
                    .map(|b| (AgentId(b as u32), agree[a][b] as f64 / epoch as f64))
                    .collect();
                let trust = top_k_trust(me, scores, trust_k)?;
                let peers: Vec<NeighborObservation> = observations.iter().filter(|o| o.agent != me).cloned().collect();
                states[a].record_social(&peers, &trust)?;
            }
        }
    }

    Ok(ExperimentResult {
        config: config.clone(),
        records,
        collided,
    })
}

fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> f64 {
    if rng.random::<f64>() < p {
        1.0
    } else {
        0.0
    }
}
