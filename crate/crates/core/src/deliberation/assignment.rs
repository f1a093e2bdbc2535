//! Choosing which pair a reviewer compares next.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::judgment::{ItemId, ScorePosterior};

/// Unordered item pair, stored with the smaller id first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pair(ItemId, ItemId);

impl Pair {
    /// `None` when both ids are equal.
    pub fn new(a: ItemId, b: ItemId) -> Option<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Some(Self(a, b)),
            std::cmp::Ordering::Greater => Some(Self(b, a)),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn low(&self) -> &ItemId {
        &self.0
    }

    pub fn high(&self) -> &ItemId {
        &self.1
    }

    pub fn contains(&self, item: &ItemId) -> bool {
        &self.0 == item || &self.1 == item
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairPolicy {
    /// Thompson-sampled disagreement between two posterior draws.
    #[default]
    Adaptive,
    /// Least-assigned pair first, then lexicographic order.
    RoundRobin,
}

/// Picks one of `candidates` (non-empty).
///
/// Adaptive selection draws two strength vectors from the posterior and
/// scores each pair by how much their implied win probabilities disagree.
/// Ties, and every choice under round-robin, fall back to the fewest total
/// assignments and then lexicographic pair order.
pub fn select_pair<R: Rng + ?Sized>(
    posterior: &ScorePosterior,
    candidates: &[Pair],
    assigned: &BTreeMap<Pair, u64>,
    policy: PairPolicy,
    rng: &mut R,
) -> Pair {
    assert!(!candidates.is_empty(), "select_pair needs candidates");
    let count = |p: &Pair| assigned.get(p).copied().unwrap_or(0);
    let disagreement: Box<dyn Fn(&Pair) -> f64> = match policy {
        PairPolicy::RoundRobin => Box::new(|_| 0.0),
        PairPolicy::Adaptive => {
            let first = posterior.particle(posterior.sample_index(rng));
            let second = posterior.particle(posterior.sample_index(rng));
            let items = posterior.items();
            let index = move |id: &ItemId| items.binary_search(id).expect("candidate items are in the posterior");
            Box::new(move |p: &Pair| {
                let (i, j) = (index(p.low()), index(p.high()));
                let p1 = first[i] / (first[i] + first[j]);
                let p2 = second[i] / (second[i] + second[j]);
                (p1 - p2).abs()
            })
        }
    };
    candidates
        .iter()
        .map(|p| (p, disagreement(p), count(p)))
        .min_by(|a, b| b.1.total_cmp(&a.1).then(a.2.cmp(&b.2)).then_with(|| a.0.cmp(b.0)))
        .map(|(p, _, _)| p.clone())
        .expect("non-empty candidates")
}
