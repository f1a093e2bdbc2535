//! Exhaustive simplex search, a slow but assumption-free reference for the
//! iterative fitter on small tallies.

use std::collections::BTreeMap;

use super::{ComparisonTally, ItemId, JudgmentError, ScoreVector};

/// Largest item count the exhaustive search accepts.
pub const GRID_MAX_ITEMS: usize = 3;

/// Maximizes the regularized Bradley-Terry log-likelihood over every point
/// of the simplex whose coordinates are positive multiples of `1 / steps`.
///
/// The likelihood uses the same pseudo-counts as the fitter: `epsilon` wins
/// in both directions of every pair that has at least one comparison. Each
/// term `w_ij ln(p_i / (p_i + p_j))` reads from a table of `ln(k / steps)`,
/// since sums of grid coordinates stay on the grid. Ties keep the first
/// point in lexicographic order.
pub fn grid_search(tally: &ComparisonTally, epsilon: f64, steps: usize) -> Result<ScoreVector, JudgmentError> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(JudgmentError::InvalidEpsilon(epsilon));
    }
    let items: Vec<ItemId> = tally.items().into_iter().collect();
    if items.is_empty() {
        return Err(JudgmentError::NoComparisons);
    }
    if items.len() > GRID_MAX_ITEMS || steps < items.len() {
        return Err(JudgmentError::KOutOfRange {
            k: steps,
            items: items.len(),
        });
    }
    let n = items.len();
    let mut w = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && tally.total(&items[i], &items[j]) > 0 {
                w[i][j] = tally.wins(&items[i], &items[j]) as f64 + epsilon;
            }
        }
    }
    let ln: Vec<f64> = (0..=steps).map(|k| (k as f64 / steps as f64).ln()).collect();
    let loglik = |g: &[usize]| -> f64 {
        let mut ll = 0.0;
        for i in 0..n {
            for j in 0..n {
                if w[i][j] > 0.0 {
                    ll += w[i][j] * (ln[g[i]] - ln[g[i] + g[j]]);
                }
            }
        }
        ll
    };

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut consider = |g: Vec<usize>| {
        let ll = loglik(&g);
        if best.as_ref().map_or(true, |(b, _)| ll > *b) {
            best = Some((ll, g));
        }
    };
    match n {
        1 => consider(vec![steps]),
        2 => (1..steps).for_each(|a| consider(vec![a, steps - a])),
        _ => {
            for a in 1..steps - 1 {
                for b in 1..steps - a {
                    consider(vec![a, b, steps - a - b]);
                }
            }
        }
    }
    let (_, g) = best.expect("grid has points");
    let strengths: BTreeMap<ItemId, f64> = items
        .into_iter()
        .zip(g)
        .map(|(id, k)| (id, k as f64 / steps as f64))
        .collect();
    ScoreVector::from_strengths(strengths)
}
