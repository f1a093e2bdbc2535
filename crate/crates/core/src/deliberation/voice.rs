use serde::{Deserialize, Serialize};

use super::{assignment::Pair, DeliberationError, ParticipantId};
use crate::judgment::{ComparisonTally, ItemId, ScorePosterior};

/// Pairs need at least this many judgments before their split counts as a tension.
pub const MIN_TENSION_JUDGMENTS: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiceEntry {
    pub item: ItemId,
    /// Posterior mean strength.
    pub mean: f64,
    /// Probability of ranking among the top `k`.
    pub topk_prob: f64,
}

/// Ranked ideas of a session.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CollectiveVoice {
    /// Ordered by top-k probability, then posterior mean, then item id.
    pub entries: Vec<VoiceEntry>,
    pub k: usize,
    pub convergence: f64,
    /// Judgments incorporated.
    pub epoch: u64,
}

impl CollectiveVoice {
    /// Builds the voice from a posterior; empty when it holds no items.
    pub fn from_posterior(
        posterior: &ScorePosterior,
        top_k: usize,
        convergence: f64,
        epoch: u64,
    ) -> Result<Self, DeliberationError> {
        let n = posterior.items().len();
        if n == 0 {
            return Ok(Self {
                convergence,
                epoch,
                ..Self::default()
            });
        }
        let k = top_k.clamp(1, n);
        let means = posterior.means()?;
        let confidence = posterior.rank_confidence(k)?;
        let mut entries: Vec<VoiceEntry> = posterior
            .items()
            .iter()
            .map(|id| VoiceEntry {
                item: id.clone(),
                mean: means.get(id).expect("same support"),
                topk_prob: confidence[id],
            })
            .collect();
        entries.sort_by(|a, b| {
            b.topk_prob
                .total_cmp(&a.topk_prob)
                .then(b.mean.total_cmp(&a.mean))
                .then_with(|| a.item.cmp(&b.item))
        });
        Ok(Self {
            entries,
            k,
            convergence,
            epoch,
        })
    }

    pub fn ordering(&self) -> Vec<ItemId> {
        self.entries.iter().map(|e| e.item.clone()).collect()
    }

    /// The first `k` items, sorted by id.
    pub fn top_set(&self) -> Vec<ItemId> {
        let mut top: Vec<ItemId> = self.entries.iter().take(self.k).map(|e| e.item.clone()).collect();
        top.sort();
        top
    }
}

/// A pair whose reviewers are split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tension {
    pub pair: Pair,
    /// `1 - |2 * wins(low, high) / n - 1|`: 1 for an even split, 0 for unanimity.
    pub disagreement: f64,
    pub judgments: u64,
}

/// Pairs with at least [`MIN_TENSION_JUDGMENTS`] judgments whose
/// disagreement reaches `threshold`, most contested first.
pub fn surface_tensions(tally: &ComparisonTally, threshold: f64) -> Vec<Tension> {
    let mut out: Vec<Tension> = tally
        .pairs()
        .into_iter()
        .filter_map(|(a, b)| {
            let n = tally.total(&a, &b);
            if n < MIN_TENSION_JUDGMENTS {
                return None;
            }
            let share = tally.wins(&a, &b) as f64 / n as f64;
            let disagreement = 1.0 - (2.0 * share - 1.0).abs();
            (disagreement >= threshold).then(|| Tension {
                pair: Pair::new(a, b).expect("tally pairs are distinct"),
                disagreement,
                judgments: n,
            })
        })
        .collect();
    out.sort_by(|x, y| {
        y.disagreement
            .total_cmp(&x.disagreement)
            .then_with(|| x.pair.cmp(&y.pair))
    });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub participant: ParticipantId,
    pub alias: String,
    /// Sum of posterior mean strengths of this participant's ideas.
    pub relevance: f64,
    pub ideas: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tally(entries: &[(&str, &str, u64)]) -> ComparisonTally {
        let mut t = ComparisonTally::new();
        for (w, l, n) in entries {
            t.add_wins(&(*w).into(), &(*l).into(), *n).unwrap();
        }
        t
    }

    #[test]
    fn unanimous_pairs_never_surface() {
        let t = tally(&[("a", "b", 10)]);
        assert!(surface_tensions(&t, 0.0).iter().all(|x| x.disagreement == 0.0));
        assert!(surface_tensions(&t, 0.01).is_empty());
    }

    #[test]
    fn even_split_is_maximal() {
        let t = tally(&[("a", "b", 5), ("b", "a", 5)]);
        let found = surface_tensions(&t, 1.0);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].disagreement, 1.0);
    }

    #[test]
    fn paper_pairs() {
        let t = tally(&[
            ("A", "B", 7),
            ("B", "A", 3),
            ("A", "C", 6),
            ("C", "A", 4),
            ("B", "C", 8),
            ("C", "B", 2),
        ]);
        let found = surface_tensions(&t, 0.0);
        let ab = found
            .iter()
            .find(|x| x.pair.low() == &ItemId::from("A") && x.pair.high() == &ItemId::from("B"))
            .unwrap();
        assert!((ab.disagreement - 0.6).abs() < 1e-12);
        // A-C (6-4) is the most contested, then A-B (7-3), then B-C (8-2)
        let order: Vec<f64> = found.iter().map(|x| x.disagreement).collect();
        assert!((order[0] - 0.8).abs() < 1e-12);
        assert!((order[2] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn small_samples_are_ignored() {
        let t = tally(&[("a", "b", 2), ("b", "a", 1)]);
        assert!(surface_tensions(&t, 0.0).is_empty());
    }
}
