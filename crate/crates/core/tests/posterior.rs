//! Particle posterior against the static fit, item insertion, and drift.

use gci_core::judgment::{fit_scores, init_posterior, Judgment};
use gci_core::{ComparisonTally, ItemId, ScorePosterior};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ids(names: &[&str]) -> Vec<ItemId> {
    names.iter().map(|s| ItemId::from(*s)).collect()
}

/// The 30 judgments of the A/B/C example, interleaved by reviewer.
fn paper_judgments() -> Vec<Judgment> {
    let mut out = Vec::new();
    for r in 0..10 {
        out.push(if r < 7 {
            Judgment::new("A", "B")
        } else {
            Judgment::new("B", "A")
        });
        out.push(if r < 6 {
            Judgment::new("A", "C")
        } else {
            Judgment::new("C", "A")
        });
        out.push(if r < 8 {
            Judgment::new("B", "C")
        } else {
            Judgment::new("C", "B")
        });
    }
    out
}

fn observe_all(mut p: ScorePosterior, judgments: &[Judgment]) -> ScorePosterior {
    for j in judgments {
        p.apply(j).unwrap();
    }
    p
}

#[test]
fn posterior_mean_tracks_static_mle() {
    let judgments = paper_judgments();
    let mle = fit_scores(&ComparisonTally::from_judgments(&judgments).unwrap(), 0.0).unwrap();
    for seed in 0..5 {
        let p = observe_all(init_posterior(&ids(&["A", "B", "C"]), 1000, seed).unwrap(), &judgments);
        let means = p.means().unwrap();
        for (id, v) in mle.iter() {
            let m = means.get(id).unwrap();
            assert!((m - v).abs() <= 0.05, "seed {seed} {id}: {m} vs {v}");
        }
        assert_eq!(means.ranking(), ids(&["A", "B", "C"]));
    }
}

#[test]
fn inserting_an_item_preserves_mean_ratios() {
    let p = observe_all(
        init_posterior(&ids(&["A", "B", "C"]), 1000, 11).unwrap(),
        &paper_judgments(),
    );
    let q = p.with_item("D".into()).unwrap();
    let ratio = |p: &ScorePosterior, a: &str, b: &str| p.mean(&a.into()).unwrap() / p.mean(&b.into()).unwrap();
    for (a, b) in [("A", "B"), ("A", "C"), ("B", "C")] {
        let (before, after) = (ratio(&p, a, b), ratio(&q, a, b));
        assert!((after / before - 1.0).abs() <= 0.02, "{a}/{b}: {before} -> {after}");
    }
    // the newcomer takes a Beta(1, 3) share on average
    assert!((q.mean(&"D".into()).unwrap() - 0.25).abs() < 0.03);
}

#[test]
fn one_observation_favors_the_winner() {
    for seed in 0..20 {
        let p = init_posterior(&ids(&["a", "b", "c", "d"]), 1000, seed).unwrap();
        let q = p.observe(&Judgment::new("c", "a")).unwrap();
        let ratio = |p: &ScorePosterior| p.mean(&"c".into()).unwrap() / p.mean(&"a".into()).unwrap();
        assert!(ratio(&q) > ratio(&p));
        let top = |p: &ScorePosterior| p.rank_confidence(1).unwrap()[&ItemId::from("c")];
        assert!(top(&q) >= top(&p));
    }
}

#[test]
fn identical_inputs_give_identical_posteriors() {
    let run = || {
        observe_all(
            init_posterior(&ids(&["A", "B", "C"]), 500, 3).unwrap(),
            &paper_judgments(),
        )
    };
    assert_eq!(run(), run());
    let json = serde_json::to_string(&run()).unwrap();
    assert_eq!(serde_json::from_str::<ScorePosterior>(&json).unwrap(), run());
}

/// Preferences swap halfway; a drifting posterior follows, a static one lags.
#[test]
fn drift_tracks_a_preference_swap() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let stream: Vec<Judgment> = (0..200)
        .map(|t| {
            let a_wins = rng.random::<f64>() < if t < 100 { 0.9 } else { 0.1 };
            if a_wins {
                Judgment::new("a", "b")
            } else {
                Judgment::new("b", "a")
            }
        })
        .collect();
    let start = init_posterior(&ids(&["a", "b"]), 1000, 5).unwrap();
    let mut fixed = start.clone();
    let mut moving = start;
    for (t, j) in stream.iter().enumerate() {
        fixed.apply(j).unwrap();
        moving = moving.observe(j).unwrap().drift(0.15, t as u64).unwrap();
    }
    let b = ItemId::from("b");
    let (static_b, drift_b) = (fixed.mean(&b).unwrap(), moving.mean(&b).unwrap());
    assert!(drift_b > 0.7, "{drift_b}");
    assert!(drift_b > static_b + 0.1, "{drift_b} vs {static_b}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn topk_probabilities_sum_to_k(
        pairs in prop::collection::vec((0usize..5, 0usize..5), 0..30),
        k in 1usize..=5,
        seed in any::<u64>(),
    ) {
        let names = ["a", "b", "c", "d", "e"];
        let mut p = init_posterior(&ids(&names), 200, seed).unwrap();
        for (w, l) in pairs.into_iter().filter(|(w, l)| w != l) {
            p.apply(&Judgment::new(names[w], names[l])).unwrap();
        }
        let total: f64 = p.rank_confidence(k).unwrap().values().sum();
        prop_assert!((total - k as f64).abs() < 1e-6);
        let weights: f64 = p.weights().iter().sum();
        prop_assert!((weights - 1.0).abs() < 1e-9);
    }
}
