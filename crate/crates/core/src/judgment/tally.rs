use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ItemId, Judgment, JudgmentError};

/// Win counts per ordered pair: `wins(i, j)` reviewers preferred `i` over `j`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonTally {
    #[serde(with = "pair_entries")]
    wins: BTreeMap<(ItemId, ItemId), u64>,
}

impl ComparisonTally {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a tally from a judgment stream.
    pub fn from_judgments<'a, I>(judgments: I) -> Result<Self, JudgmentError>
    where
        I: IntoIterator<Item = &'a Judgment>,
    {
        let mut tally = Self::new();
        for j in judgments {
            tally.record(&j.winner, &j.loser)?;
        }
        Ok(tally)
    }

    pub fn record(&mut self, winner: &ItemId, loser: &ItemId) -> Result<(), JudgmentError> {
        self.add_wins(winner, loser, 1)
    }

    pub fn add_wins(&mut self, winner: &ItemId, loser: &ItemId, count: u64) -> Result<(), JudgmentError> {
        if winner == loser {
            return Err(JudgmentError::DegeneratePair(winner.clone()));
        }
        if count > 0 {
            *self.wins.entry((winner.clone(), loser.clone())).or_insert(0) += count;
        }
        Ok(())
    }

    pub fn wins(&self, i: &ItemId, j: &ItemId) -> u64 {
        self.wins.get(&(i.clone(), j.clone())).copied().unwrap_or(0)
    }

    /// Total comparisons between `i` and `j` in either direction.
    pub fn total(&self, i: &ItemId, j: &ItemId) -> u64 {
        self.wins(i, j) + self.wins(j, i)
    }

    /// Every item mentioned by at least one comparison, sorted.
    pub fn items(&self) -> BTreeSet<ItemId> {
        self.wins.keys().flat_map(|(i, j)| [i.clone(), j.clone()]).collect()
    }

    /// Unordered pairs with at least one comparison, each as `(lower, higher)` by id.
    pub fn pairs(&self) -> BTreeSet<(ItemId, ItemId)> {
        self.wins
            .keys()
            .map(|(i, j)| {
                if i < j {
                    (i.clone(), j.clone())
                } else {
                    (j.clone(), i.clone())
                }
            })
            .collect()
    }

    /// Non-zero ordered entries `(winner, loser, wins)`.
    pub fn entries(&self) -> impl Iterator<Item = (&ItemId, &ItemId, u64)> {
        self.wins.iter().map(|((i, j), n)| (i, j, *n))
    }

    pub fn is_empty(&self) -> bool {
        self.wins.is_empty()
    }

    pub fn judgment_count(&self) -> u64 {
        self.wins.values().sum()
    }
}

/// Serializes the pair map as a list of `{winner, loser, wins}` records so the
/// JSON form has string keys only.
mod pair_entries {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::judgment::ItemId;

    #[derive(Serialize, Deserialize)]
    struct Entry {
        winner: ItemId,
        loser: ItemId,
        wins: u64,
    }

    pub fn serialize<S: Serializer>(map: &BTreeMap<(ItemId, ItemId), u64>, s: S) -> Result<S::Ok, S::Error> {
        let entries: Vec<Entry> = map
            .iter()
            .map(|((w, l), n)| Entry {
                winner: w.clone(),
                loser: l.clone(),
                wins: *n,
            })
            .collect();
        entries.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<(ItemId, ItemId), u64>, D::Error> {
        let entries = Vec::<Entry>::deserialize(d)?;
        let mut map = BTreeMap::new();
        for e in entries {
            if e.winner == e.loser {
                return Err(serde::de::Error::custom(format!("degenerate pair {}", e.winner)));
            }
            if e.wins > 0 {
                *map.entry((e.winner, e.loser)).or_insert(0) += e.wins;
            }
        }
        Ok(map)
    }
}
