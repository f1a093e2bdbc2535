use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AgentId, RegretError};

/// A reward another agent reported for one of its pulls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborObservation {
    pub agent: AgentId,
    pub arm: usize,
    pub reward: f64,
    pub epoch: u64,
}

/// How much an agent trusts each peer's reports. The owner always trusts
/// itself fully.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustWeights {
    owner: AgentId,
    weights: BTreeMap<AgentId, f64>,
}

impl TrustWeights {
    pub fn new<I>(owner: AgentId, weights: I) -> Result<Self, RegretError>
    where
        I: IntoIterator<Item = (AgentId, f64)>,
    {
        let mut map = BTreeMap::new();
        for (agent, weight) in weights {
            if !(0.0..=1.0).contains(&weight) {
                return Err(RegretError::InvalidTrust { agent, weight });
            }
            if agent != owner {
                map.insert(agent, weight);
            }
        }
        Ok(Self { owner, weights: map })
    }

    pub fn owner(&self) -> AgentId {
        self.owner
    }

    /// Weight for `agent`, or `None` when the agent has no entry.
    pub fn weight(&self, agent: AgentId) -> Option<f64> {
        if agent == self.owner {
            Some(1.0)
        } else {
            self.weights.get(&agent).copied()
        }
    }

    /// Peers with non-zero weight.
    pub fn trusted(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.weights.iter().filter(|(_, w)| **w > 0.0).map(|(a, _)| *a)
    }
}

/// Splits each arm's payoff evenly among the agents that chose it.
pub fn resolve_collisions(
    choices: &BTreeMap<AgentId, usize>,
    payoffs: &BTreeMap<usize, f64>,
) -> Result<BTreeMap<AgentId, f64>, RegretError> {
    let mut crowd: BTreeMap<usize, usize> = BTreeMap::new();
    for arm in choices.values() {
        *crowd.entry(*arm).or_default() += 1;
    }
    choices
        .iter()
        .map(|(agent, arm)| {
            let payoff = payoffs.get(arm).ok_or(RegretError::MissingPayoff(*arm))?;
            Ok((*agent, payoff / crowd[arm] as f64))
        })
        .collect()
}

/// Fraction of epochs in which two choice histories picked the same arm.
pub fn agreement(mine: &[usize], theirs: &[usize]) -> f64 {
    if mine.is_empty() {
        return 0.0;
    }
    let same = mine.iter().zip(theirs).filter(|(a, b)| a == b).count();
    same as f64 / mine.len() as f64
}

/// Trusts the `k` peers whose past choices agree most with `me`'s.
pub fn select_trust_subset(
    me: AgentId,
    my_choices: &[usize],
    others: &BTreeMap<AgentId, Vec<usize>>,
    k: usize,
) -> Result<TrustWeights, RegretError> {
    if my_choices.is_empty() {
        return Err(RegretError::EmptyHistory);
    }
    let mut scored = Vec::with_capacity(others.len());
    for (agent, history) in others {
        if *agent == me {
            continue;
        }
        if history.len() != my_choices.len() {
            return Err(RegretError::HistoryLength {
                agent: *agent,
                expected: my_choices.len(),
                actual: history.len(),
            });
        }
        scored.push((*agent, agreement(my_choices, history)));
    }
    top_k_trust(me, scored, k)
}

/// Weight 1 for the `k` highest-agreement peers (ties by id), 0 for the rest.
pub fn top_k_trust(me: AgentId, mut agreements: Vec<(AgentId, f64)>, k: usize) -> Result<TrustWeights, RegretError> {
    agreements.retain(|(a, _)| *a != me);
    if k > agreements.len() {
        return Err(RegretError::TrustSubsetTooLarge {
            k,
            available: agreements.len(),
        });
    }
    agreements.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let weights = agreements
        .iter()
        .enumerate()
        .map(|(rank, (agent, _))| (*agent, if rank < k { 1.0 } else { 0.0 }));
    TrustWeights::new(me, weights)
}
