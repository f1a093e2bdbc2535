//! Property checks for the bandit, cooperation and social-learning pieces.

use std::collections::BTreeMap;

use gci_core::regret::{
    agreement, resolve_collisions, run_regret_experiment, select_trust_subset, top_k_trust, AgentId, ExperimentConfig,
    NeighborObservation, Policy, SocialBelief, TrustWeights,
};
use gci_core::BanditState;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn bee_scenario_crosses_even_odds_at_the_third_scout() {
    let b = SocialBelief::new(0.05, 3.0).unwrap();
    let posteriors: Vec<f64> = (0..=4).map(|n| b.social_update(n).posterior()).collect();
    assert!((posteriors[2] - 0.321).abs() < 5e-4, "{posteriors:?}");
    assert!((posteriors[3] - 0.587).abs() < 5e-4, "{posteriors:?}");
    let first_adopting = (0..=4).find(|n| b.social_update(*n).adopts());
    assert_eq!(first_adopting, Some(3));
}

#[test]
fn two_arm_regret_is_small_and_sublinear() {
    let per_step = |horizon: usize| {
        (0..20)
            .map(|seed| {
                let r = run_regret_experiment(&ExperimentConfig::new(vec![0.9, 0.1], 1, horizon, seed)).unwrap();
                r.mean_final_regret() / horizon as f64
            })
            .sum::<f64>()
            / 20.0
    };
    let (short, long) = (per_step(1_000), per_step(10_000));
    assert!(long < 0.05, "{long}");
    assert!(long < short / 2.0, "{long} vs {short}");
}

#[test]
fn ucb_also_learns_the_better_arm() {
    let mut cfg = ExperimentConfig::new(vec![0.9, 0.1], 1, 5_000, 3);
    cfg.policy = Policy::Ucb;
    let r = run_regret_experiment(&cfg).unwrap();
    assert!(r.mean_final_regret() / 5_000.0 < 0.05);
}

#[test]
fn experiments_are_reproducible() {
    let mut cfg = ExperimentConfig::new(vec![0.2, 0.5, 0.7], 3, 300, 17);
    cfg.sharing = true;
    cfg.collisions = true;
    assert_eq!(
        run_regret_experiment(&cfg).unwrap(),
        run_regret_experiment(&cfg).unwrap()
    );
}

fn arb_observations() -> impl Strategy<Value = Vec<(u32, usize, f64)>> {
    prop::collection::vec((0u32..5, 0usize..3, 0.0f64..=1.0), 0..30)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn conjugate_bookkeeping_is_exact(
        own in prop::collection::vec((0usize..3, prop::bool::ANY), 0..50),
        social in arb_observations(),
        trust in prop::collection::vec(0.0f64..=1.0, 4),
    ) {
        let mut state = BanditState::new(3, Policy::Thompson).unwrap();
        for (arm, win) in &own {
            state.record_own(*arm, if *win { 1.0 } else { 0.0 }).unwrap();
        }
        let weights = TrustWeights::new(AgentId(0), (1..5).map(|a| (AgentId(a), trust[a as usize - 1]))).unwrap();
        let obs: Vec<NeighborObservation> = social
            .iter()
            .map(|(agent, arm, reward)| NeighborObservation { agent: AgentId(*agent), arm: *arm, reward: *reward, epoch: 0 })
            .collect();
        state.record_social(&obs, &weights).unwrap();

        for arm in 0..3 {
            let belief = state.arm(arm).unwrap();
            let pulls = own.iter().filter(|(a, _)| *a == arm).count() as f64;
            let social_mass: f64 = social
                .iter()
                .filter(|(_, a, _)| *a == arm)
                .map(|(agent, _, _)| weights.weight(AgentId(*agent)).unwrap())
                .sum();
            let added = belief.alpha + belief.beta - 2.0;
            prop_assert!((added - (pulls + social_mass)).abs() < 1e-9);
            prop_assert_eq!(belief.pulls as f64, pulls);
        }
    }

    #[test]
    fn collisions_conserve_payoff(
        choices in prop::collection::vec(0usize..4, 1..8),
        payoffs in prop::collection::vec(0.0f64..=1.0, 4),
    ) {
        let choice_map: BTreeMap<AgentId, usize> =
            choices.iter().enumerate().map(|(a, arm)| (AgentId(a as u32), *arm)).collect();
        let payoff_map: BTreeMap<usize, f64> = payoffs.iter().copied().enumerate().collect();
        let paid = resolve_collisions(&choice_map, &payoff_map).unwrap();
        for (arm, payoff) in payoffs.iter().enumerate() {
            let takers: Vec<_> = choice_map.iter().filter(|(_, c)| **c == arm).map(|(a, _)| *a).collect();
            if takers.is_empty() {
                continue;
            }
            let total: f64 = takers.iter().map(|a| paid[a]).sum();
            prop_assert!((total - payoff).abs() < 1e-12);
        }
    }

    #[test]
    fn social_update_is_order_independent(prior in 0.001f64..0.999, lr in 0.1f64..10.0, n in 0u64..20, m in 0u64..20) {
        let b = SocialBelief::new(prior, lr).unwrap();
        let stepwise = b.social_update(n).social_update(m);
        let at_once = b.social_update(n + m);
        prop_assert_eq!(stepwise.posterior(), at_once.posterior());
        prop_assert_eq!(stepwise.observations(), n + m);
    }

    #[test]
    fn trust_subset_depends_only_on_agreement_and_ids(
        histories in prop::collection::vec(prop::collection::vec(0usize..3, 12), 2..6),
        k_seed in any::<u64>(),
    ) {
        let me = AgentId(0);
        let others: BTreeMap<AgentId, Vec<usize>> = histories[1..]
            .iter()
            .enumerate()
            .map(|(i, h)| (AgentId(i as u32 + 1), h.clone()))
            .collect();
        let k = (k_seed as usize) % (others.len() + 1);
        let chosen = select_trust_subset(me, &histories[0], &others, k).unwrap();

        let mut scored: Vec<(AgentId, f64)> = others.iter().map(|(a, h)| (*a, agreement(&histories[0], h))).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(k_seed);
        for i in (1..scored.len()).rev() {
            scored.swap(i, rng.random_range(0..=i));
        }
        prop_assert_eq!(&chosen, &top_k_trust(me, scored, k).unwrap());
        prop_assert_eq!(chosen.trusted().count(), k);
    }
}
