//! Particle approximation of the posterior over Bradley-Terry strengths.
//!
//! Each particle carries unnormalized masses `g_i > 0`; its strength vector
//! is `g / sum(g)`. Under the prior the masses are i.i.d. `Exp(1)`, which
//! makes the strengths `Dirichlet(1)` and the total mass an independent
//! `Gamma(n, 1)`. Because the Bradley-Terry likelihood only sees ratios, the
//! total mass keeps that distribution through every update, so a new item is
//! added by drawing one more `Exp(1)` mass per particle: its share is
//! `Beta(1, n)` and the ratios among existing items are untouched.
//!
//! Items are kept sorted by id and every random draw comes from a stream keyed
//! by the posterior seed plus the item id or update epoch, so the result does
//! not depend on the order in which items were added.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ItemId, Judgment, JudgmentError, ScoreVector};
use crate::rng;

pub const DEFAULT_PARTICLES: usize = 1000;

/// Metropolis sweeps run over every particle after each resampling step.
const MOVE_SWEEPS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorePosterior {
    items: Vec<ItemId>,
    particles: usize,
    /// Row-major `particles x items` unnormalized masses.
    mass: Vec<f64>,
    weights: Vec<f64>,
    seed: u64,
    epoch: u64,
    /// Row-major `items x items` observed wins, the sufficient statistic for
    /// the static model.
    evidence: Vec<u64>,
    /// Whether resampling is followed by Metropolis moves targeting the
    /// static posterior. Cleared by drift and for hand-built particle sets.
    rejuvenate: bool,
}

/// Draws a posterior of `particles` strength vectors from the symmetric
/// `Dirichlet(1)` prior over `items`, all equally weighted.
pub fn init_posterior(items: &[ItemId], particles: usize, seed: u64) -> Result<ScorePosterior, JudgmentError> {
    if items.is_empty() {
        return Err(JudgmentError::NoItems);
    }
    let mut p = ScorePosterior::empty(particles, seed)?;
    for item in items {
        p.insert_item(item.clone())?;
    }
    Ok(p)
}

impl ScorePosterior {
    /// A posterior over zero items, ready for [`insert_item`](Self::insert_item).
    pub fn empty(particles: usize, seed: u64) -> Result<Self, JudgmentError> {
        if particles == 0 {
            return Err(JudgmentError::NoParticles);
        }
        Ok(Self {
            items: Vec::new(),
            particles,
            mass: Vec::new(),
            weights: vec![1.0 / particles as f64; particles],
            seed,
            epoch: 0,
            evidence: Vec::new(),
            rejuvenate: true,
        })
    }

    /// Builds a posterior from explicit `(strengths, weight)` particles.
    ///
    /// Strength rows follow the order of `items`. Weights are normalized.
    /// Hand-built posteriors are never rejuvenated, since their target
    /// distribution is unknown.
    pub fn from_particles(
        items: Vec<ItemId>,
        particles: Vec<(Vec<f64>, f64)>,
        seed: u64,
    ) -> Result<Self, JudgmentError> {
        if items.is_empty() {
            return Err(JudgmentError::NoItems);
        }
        if particles.is_empty() {
            return Err(JudgmentError::NoParticles);
        }
        let mut order: Vec<usize> = (0..items.len()).collect();
        order.sort_by(|&a, &b| items[a].cmp(&items[b]));
        for w in order.windows(2) {
            if items[w[0]] == items[w[1]] {
                return Err(JudgmentError::DuplicateItem(items[w[0]].clone()));
            }
        }
        let n = items.len();
        let gamma = Gamma::new(n as f64, 1.0).expect("valid gamma shape");
        let mut scale_rng = rng::stream(seed, &[b"scale"]);
        let mut mass = Vec::with_capacity(particles.len() * n);
        let mut weights = Vec::with_capacity(particles.len());
        for (k, (row, w)) in particles.iter().enumerate() {
            if row.len() != n {
                return Err(JudgmentError::InvalidParticles(format!(
                    "particle {k} has {} strengths for {n} items",
                    row.len()
                )));
            }
            if row.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(JudgmentError::InvalidParticles(format!(
                    "particle {k} has a non-positive strength"
                )));
            }
            if !(w.is_finite() && *w >= 0.0) {
                return Err(JudgmentError::InvalidParticles(format!(
                    "particle {k} has an invalid weight {w}"
                )));
            }
            let total: f64 = row.iter().sum();
            let scale: f64 = gamma.sample(&mut scale_rng);
            mass.extend(order.iter().map(|&i| row[i] / total * scale));
            weights.push(*w);
        }
        let wsum: f64 = weights.iter().sum();
        if wsum <= 0.0 {
            return Err(JudgmentError::InvalidParticles("weights sum to zero".into()));
        }
        weights.iter_mut().for_each(|w| *w /= wsum);
        let items = order.iter().map(|&i| items[i].clone()).collect();
        Ok(Self {
            items,
            particles: particles.len(),
            mass,
            weights,
            seed,
            epoch: 0,
            evidence: vec![0; n * n],
            rejuvenate: false,
        })
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn particle_count(&self) -> usize {
        self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of observe and drift steps applied so far.
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn contains(&self, item: &ItemId) -> bool {
        self.index_of(item).is_some()
    }

    /// Normalized strengths of particle `k`, in [`items`](Self::items) order.
    pub fn particle(&self, k: usize) -> Vec<f64> {
        let row = self.row(k);
        let total: f64 = row.iter().sum();
        row.iter().map(|g| g / total).collect()
    }

    /// Kish effective sample size of the weights.
    pub fn effective_sample_size(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Posterior mean strength of every item.
    pub fn means(&self) -> Result<ScoreVector, JudgmentError> {
        if self.items.is_empty() {
            return Err(JudgmentError::NoItems);
        }
        let mut acc = vec![0.0; self.items.len()];
        for k in 0..self.particles {
            let row = self.row(k);
            let scale = self.weights[k] / row.iter().sum::<f64>();
            acc.iter_mut().zip(row).for_each(|(a, g)| *a += g * scale);
        }
        ScoreVector::from_strengths(self.items.iter().cloned().zip(acc))
    }

    pub fn mean(&self, item: &ItemId) -> Result<f64, JudgmentError> {
        let i = self.require(item)?;
        Ok(self.weighted_mean(i))
    }

    pub fn variance(&self, item: &ItemId) -> Result<f64, JudgmentError> {
        let i = self.require(item)?;
        let m = self.weighted_mean(i);
        Ok((0..self.particles)
            .map(|k| {
                let row = self.row(k);
                let d = row[i] / row.iter().sum::<f64>() - m;
                self.weights[k] * d * d
            })
            .sum())
    }

    /// Draws one particle index in proportion to the weights.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return k;
            }
        }
        self.particles - 1
    }

    /// Draws one strength vector from the posterior.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ScoreVector, JudgmentError> {
        if self.items.is_empty() {
            return Err(JudgmentError::NoItems);
        }
        let k = self.sample_index(rng);
        ScoreVector::from_strengths(self.items.iter().cloned().zip(self.particle(k)))
    }

    /// Returns a copy extended with `item`.
    pub fn with_item(&self, item: ItemId) -> Result<Self, JudgmentError> {
        let mut next = self.clone();
        next.insert_item(item)?;
        Ok(next)
    }

    /// Adds `item`, giving it an `Exp(1)` mass in every particle.
    pub fn insert_item(&mut self, item: ItemId) -> Result<(), JudgmentError> {
        let pos = match self.items.binary_search(&item) {
            Ok(_) => return Err(JudgmentError::DuplicateItem(item)),
            Err(pos) => pos,
        };
        let mut draw = rng::stream(self.seed, &[b"item", item.as_str().as_bytes()]);
        let n = self.items.len();
        let mut mass = Vec::with_capacity(self.particles * (n + 1));
        for k in 0..self.particles {
            let row = &self.mass[k * n..(k + 1) * n];
            mass.extend_from_slice(&row[..pos]);
            mass.push(Exp1.sample(&mut draw));
            mass.extend_from_slice(&row[pos..]);
        }
        let mut evidence = vec![0; (n + 1) * (n + 1)];
        for i in 0..n {
            for j in 0..n {
                let (ni, nj) = (i + usize::from(i >= pos), j + usize::from(j >= pos));
                evidence[ni * (n + 1) + nj] = self.evidence[i * n + j];
            }
        }
        self.items.insert(pos, item);
        self.mass = mass;
        self.evidence = evidence;
        Ok(())
    }

    /// Bayes update for one judgment, returning the new posterior.
    pub fn observe(&self, judgment: &Judgment) -> Result<Self, JudgmentError> {
        let mut next = self.clone();
        next.apply(judgment)?;
        Ok(next)
    }

    /// In-place form of [`observe`](Self::observe).
    ///
    /// Reweights every particle by `v_winner / (v_winner + v_loser)`; when the
    /// effective sample size drops below half the particle count the set is
    /// systematically resampled and, for the static model, moved with
    /// Metropolis sweeps that leave the exact posterior invariant.
    pub fn apply(&mut self, judgment: &Judgment) -> Result<(), JudgmentError> {
        if judgment.winner == judgment.loser {
            return Err(JudgmentError::DegeneratePair(judgment.winner.clone()));
        }
        let w = self.require(&judgment.winner)?;
        let l = self.require(&judgment.loser)?;
        let n = self.items.len();
        for k in 0..self.particles {
            let (gw, gl) = (self.mass[k * n + w], self.mass[k * n + l]);
            self.weights[k] *= gw / (gw + gl);
        }
        self.normalize_weights();
        self.evidence[w * n + l] += 1;
        self.epoch += 1;

        if self.effective_sample_size() < self.particles as f64 / 2.0 {
            self.resample();
            if self.rejuvenate {
                self.move_particles();
            }
        }
        Ok(())
    }

    /// Random-walk step on log-strengths: every particle's log masses get
    /// independent `N(0, sigma^2)` noise and are rescaled to their previous
    /// total. `sigma == 0` returns the posterior unchanged.
    pub fn drift(&self, sigma: f64, seed: u64) -> Result<Self, JudgmentError> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(JudgmentError::InvalidSigma(sigma));
        }
        let mut next = self.clone();
        if sigma == 0.0 || self.items.is_empty() {
            return Ok(next);
        }
        let mut noise = rng::stream(seed, &[b"drift"]);
        let n = self.items.len();
        for row in next.mass.chunks_exact_mut(n) {
            let before: f64 = row.iter().sum();
            for g in row.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut noise);
                *g *= (sigma * z).exp();
            }
            let after: f64 = row.iter().sum();
            row.iter_mut().for_each(|g| *g *= before / after);
        }
        next.rejuvenate = false;
        next.epoch += 1;
        Ok(next)
    }

    /// Probability that each item ranks among the `k` strongest.
    ///
    /// Within a particle, equal strengths are ordered by item id so the
    /// values always sum to `k`.
    pub fn rank_confidence(&self, k: usize) -> Result<BTreeMap<ItemId, f64>, JudgmentError> {
        let n = self.items.len();
        if k == 0 || k > n {
            return Err(JudgmentError::KOutOfRange { k, items: n });
        }
        let mut acc = vec![0.0; n];
        let mut order: Vec<usize> = (0..n).collect();
        for p in 0..self.particles {
            let row = self.row(p);
            order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
            for &i in &order[..k] {
                acc[i] += self.weights[p];
            }
        }
        Ok(self.items.iter().cloned().zip(acc).collect())
    }

    fn row(&self, k: usize) -> &[f64] {
        let n = self.items.len();
        &self.mass[k * n..(k + 1) * n]
    }

    fn index_of(&self, item: &ItemId) -> Option<usize> {
        self.items.binary_search(item).ok()
    }

    fn require(&self, item: &ItemId) -> Result<usize, JudgmentError> {
        self.index_of(item)
            .ok_or_else(|| JudgmentError::UnknownItem(item.clone()))
    }

    /// Weighted first and second moments of item `i`'s strength.
    fn weighted_mean(&self, i: usize) -> f64 {
        (0..self.particles)
            .map(|k| {
                let row = self.row(k);
                self.weights[k] * row[i] / row.iter().sum::<f64>()
            })
            .sum()
    }

    fn normalize_weights(&mut self) {
        let total: f64 = self.weights.iter().sum();
        self.weights.iter_mut().for_each(|w| *w /= total);
    }

    fn resample(&mut self) {
        let n = self.items.len();
        let count = self.particles;
        let mut draw = rng::stream(self.seed, &[b"resample", &self.epoch.to_le_bytes()]);
        let step = 1.0 / count as f64;
        let mut u = draw.random::<f64>() * step;
        let mut mass = Vec::with_capacity(self.mass.len());
        let mut cumulative = self.weights[0];
        let mut k = 0;
        for _ in 0..count {
            while u > cumulative && k + 1 < count {
                k += 1;
                cumulative += self.weights[k];
            }
            mass.extend_from_slice(&self.mass[k * n..(k + 1) * n]);
            u += step;
        }
        self.mass = mass;
        self.weights = vec![step; count];
    }

    /// Component-wise random-walk Metropolis on log masses.
    ///
    /// Target per particle: `prod_i exp(-g_i)` times the Bradley-Terry
    /// likelihood of all recorded wins, i.e. the exact static posterior.
    fn move_particles(&mut self) {
        let n = self.items.len();
        if n < 2 {
            return;
        }
        let neighbors: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .filter_map(|j| {
                        let total = self.evidence[i * n + j] + self.evidence[j * n + i];
                        (total > 0).then_some((j, total as f64))
                    })
                    .collect()
            })
            .collect();
        let row_wins: Vec<f64> = (0..n)
            .map(|i| self.evidence[i * n..(i + 1) * n].iter().sum::<u64>() as f64)
            .collect();
        let steps: Vec<f64> = neighbors
            .iter()
            .map(|nb| 2.0 / (1.0 + nb.iter().map(|(_, t)| t).sum::<f64>()).sqrt())
            .collect();

        let mut draw: ChaCha8Rng = rng::stream(self.seed, &[b"move", &self.epoch.to_le_bytes()]);
        let log_target = |row: &[f64], i: usize, g: f64| -> f64 {
            let mut lt = -g + g.ln() * (1.0 + row_wins[i]);
            for &(j, total) in &neighbors[i] {
                lt -= total * (g + row[j]).ln();
            }
            lt
        };
        for row in self.mass.chunks_exact_mut(n) {
            for _ in 0..MOVE_SWEEPS {
                for i in 0..n {
                    let current = row[i];
                    let z: f64 = StandardNormal.sample(&mut draw);
                    let proposal = current * (steps[i] * z).exp();
                    let delta = log_target(row, i, proposal) - log_target(row, i, current);
                    let u: f64 = draw.random();
                    if u.ln() < delta {
                        row[i] = proposal;
                    }
                }
            }
        }
    }
}
