//! Regularized Bradley-Terry maximum likelihood via minorize-maximize.
//!
//! Each iteration applies the Zermelo update
//! `v_i <- W_i / sum_j N_ij / (v_i + v_j)` to all items simultaneously and
//! renormalizes. The update never decreases the log-likelihood.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ComparisonTally, ItemId, JudgmentError, ScoreVector, DEFAULT_EPSILON};

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Symmetric pseudo-wins added to both directions of every observed pair.
    pub epsilon: f64,
    /// Stop once the largest per-item relative change falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Keep the log-likelihood after every iteration in [`FitReport::trace`].
    pub record_trace: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            tolerance: 1e-8,
            max_iterations: 10_000,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub scores: ScoreVector,
    pub epsilon: f64,
    /// Regularized log-likelihood at the returned scores.
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood of the starting point followed by one value per iteration.
    pub trace: Vec<f64>,
}

/// Wire form of a fit: `{"scores": {...}, "epsilon": e, "loglik": l}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedScores {
    pub scores: BTreeMap<ItemId, f64>,
    pub epsilon: f64,
    pub loglik: f64,
}

impl From<&FitReport> for FittedScores {
    fn from(r: &FitReport) -> Self {
        Self {
            scores: r.scores.as_map().clone(),
            epsilon: r.epsilon,
            loglik: r.loglik,
        }
    }
}

/// Fits strengths with the default options and the given `epsilon`.
pub fn fit_scores(tally: &ComparisonTally, epsilon: f64) -> Result<ScoreVector, JudgmentError> {
    let opts = FitOptions {
        epsilon,
        ..FitOptions::default()
    };
    fit(tally, &opts).map(|r| r.scores)
}

pub fn fit(tally: &ComparisonTally, opts: &FitOptions) -> Result<FitReport, JudgmentError> {
    if !(opts.epsilon.is_finite() && opts.epsilon >= 0.0) {
        return Err(JudgmentError::InvalidEpsilon(opts.epsilon));
    }
    let problem = Problem::new(tally, opts.epsilon)?;
    problem.check_identifiable()?;

    let n = problem.items.len();
    let mut v = vec![1.0 / n as f64; n];
    let mut trace = Vec::new();
    if opts.record_trace {
        trace.push(problem.loglik(&v));
    }

    let mut iterations = 0;
    let mut converged = false;
    let mut next = vec![0.0; n];
    while iterations < opts.max_iterations {
        for i in 0..n {
            let denom: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| problem.total(i, j) / (v[i] + v[j]))
                .sum();
            next[i] = problem.row_wins[i] / denom;
        }
        let sum: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= sum);

        let change = v
            .iter()
            .zip(&next)
            .map(|(old, new)| ((new - old) / old).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut v, &mut next);
        iterations += 1;
        if opts.record_trace {
            trace.push(problem.loglik(&v));
        }
        if change < opts.tolerance {
            converged = true;
            break;
        }
    }

    let loglik = problem.loglik(&v);
    let scores = ScoreVector::from_strengths(problem.items.iter().cloned().zip(v))?;
    Ok(FitReport {
        scores,
        epsilon: opts.epsilon,
        loglik,
        iterations,
        converged,
        trace,
    })
}

/// Regularized log-likelihood `sum (wins(i,j) + eps) * ln(v_i / (v_i + v_j))`
/// over ordered pairs that were observed at least once.
pub fn log_likelihood(tally: &ComparisonTally, scores: &ScoreVector, epsilon: f64) -> Result<f64, JudgmentError> {
    let problem = Problem::new(tally, epsilon)?;
    let v = problem
        .items
        .iter()
        .map(|id| scores.get(id).ok_or_else(|| JudgmentError::UnknownItem(id.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(problem.loglik(&v))
}

/// Dense, index-based view of a tally with pseudo-wins applied.
struct Problem {
    items: Vec<ItemId>,
    /// Row-major `n x n` weighted wins.
    weights: Vec<f64>,
    row_wins: Vec<f64>,
}

impl Problem {
    fn new(tally: &ComparisonTally, epsilon: f64) -> Result<Self, JudgmentError> {
        if tally.is_empty() {
            return Err(JudgmentError::NoComparisons);
        }
        let items: Vec<ItemId> = tally.items().into_iter().collect();
        let index: BTreeMap<&ItemId, usize> = items.iter().enumerate().map(|(i, id)| (id, i)).collect();
        let n = items.len();
        let mut weights = vec![0.0; n * n];
        for (w, l, count) in tally.entries() {
            weights[index[w] * n + index[l]] += count as f64;
        }
        for (a, b) in tally.pairs() {
            let (i, j) = (index[&a], index[&b]);
            weights[i * n + j] += epsilon;
            weights[j * n + i] += epsilon;
        }
        let row_wins = (0..n).map(|i| weights[i * n..(i + 1) * n].iter().sum()).collect();
        Ok(Self {
            items,
            weights,
            row_wins,
        })
    }

    fn w(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.items.len() + j]
    }

    fn total(&self, i: usize, j: usize) -> f64 {
        self.w(i, j) + self.w(j, i)
    }

    fn loglik(&self, v: &[f64]) -> f64 {
        let n = self.items.len();
        let mut ll = 0.0;
        for i in 0..n {
            for j in 0..n {
                let w = self.w(i, j);
                if w > 0.0 {
                    ll += w * (v[i] / (v[i] + v[j])).ln();
                }
            }
        }
        ll
    }

    /// A finite maximizer exists iff the "beat" digraph is strongly connected.
    fn check_identifiable(&self) -> Result<(), JudgmentError> {
        let n = self.items.len();
        let reach = |edge: &dyn Fn(usize, usize) -> bool| {
            let mut seen = vec![false; n];
            let mut stack = vec![0];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for (j, s) in seen.iter_mut().enumerate() {
                    if !*s && edge(i, j) {
                        *s = true;
                        stack.push(j);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        if !reach(&|i, j| self.total(i, j) > 0.0) {
            return Err(JudgmentError::Disconnected);
        }
        if !reach(&|i, j| self.w(i, j) > 0.0) || !reach(&|i, j| self.w(j, i) > 0.0) {
            return Err(JudgmentError::NoFiniteMle);
        }
        Ok(())
    }
}
