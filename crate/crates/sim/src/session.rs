//! Deliberation sessions driven end to end by synthetic agents.
//!
//! Every run goes through the public session API only: a facilitator seeds
//! the ideas, agents join, ask for tasks and answer them by Bradley-Terry
//! draws from the ground truth until the budget is spent. Each finished run
//! is replayed from its exported log and the state hashes compared.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use gci_core::deliberation::{PairPolicy, ParticipantId, Phase, SessionId, TaskOutcome};
use gci_core::rng;
use gci_core::{ItemId, Session, SessionConfig};

use crate::agent::{normalize, random_truth, SyntheticAgent};
use crate::metrics::{kendall_tau, Summary};
use crate::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSimConfig {
    pub items: usize,
    pub agents: usize,
    /// Judgments to collect per run.
    pub budget: u64,
    pub seeds: u64,
    /// First seed; runs use `base_seed .. base_seed + seeds`.
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub policy: PairPolicy,
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    /// Fixed ground truth; drawn per seed when absent.
    #[serde(default)]
    pub truth: Option<Vec<f64>>,
}

fn default_particles() -> usize {
    gci_core::judgment::DEFAULT_PARTICLES
}

fn default_top_k() -> usize {
    3
}

impl SessionSimConfig {
    pub fn new(items: usize, agents: usize, budget: u64, seeds: u64) -> Self {
        Self {
            items,
            agents,
            budget,
            seeds,
            base_seed: 0,
            policy: PairPolicy::Adaptive,
            particles: default_particles(),
            top_k: default_top_k(),
            truth: None,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_owned()));
        if self.items < 2 {
            return bad("--items must be at least 2");
        }
        if self.agents < 1 {
            return bad("--agents must be at least 1");
        }
        if self.budget < 1 {
            return bad("--budget must be at least 1");
        }
        if self.seeds < 1 {
            return bad("--seeds must be at least 1");
        }
        if self.particles < 1 {
            return bad("--particles must be at least 1");
        }
        if let Some(t) = &self.truth {
            if t.len() != self.items {
                return bad("--truth needs one strength per item");
            }
            normalize(t)?;
        }
        Ok(())
    }
}

/// Metrics of one seeded session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRun {
    pub seed: u64,
    pub truth: Vec<f64>,
    /// Posterior mean strength per item, in item order.
    pub scores: Vec<f64>,
    pub kendall_tau: f64,
    pub top1_match: bool,
    pub judgments: u64,
    /// First judgment count at which the convergence score reached 0.9.
    pub convergence_epoch: Option<u64>,
    pub events: usize,
    pub state_hash: String,
    pub replay_matches: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionAggregate {
    pub kendall_tau: Summary,
    pub judgments: Summary,
    /// Over the runs that reached the convergence score.
    pub convergence_epoch: Summary,
    pub top1_matches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub config: SessionSimConfig,
    pub runs: Vec<SessionRun>,
    pub aggregate: SessionAggregate,
}

impl SessionReport {
    /// `seed,policy,kendall_tau,top1_match,judgments,convergence_epoch,state_hash,replay_matches`
    pub fn to_csv(&self) -> Result<String, SimError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "seed",
            "policy",
            "kendall_tau",
            "top1_match",
            "judgments",
            "convergence_epoch",
            "state_hash",
            "replay_matches",
        ])?;
        let policy = match self.config.policy {
            PairPolicy::Adaptive => "adaptive",
            PairPolicy::RoundRobin => "roundrobin",
        };
        for r in &self.runs {
            w.write_record([
                r.seed.to_string(),
                policy.to_owned(),
                r.kendall_tau.to_string(),
                r.top1_match.to_string(),
                r.judgments.to_string(),
                r.convergence_epoch.map(|e| e.to_string()).unwrap_or_default(),
                r.state_hash.clone(),
                r.replay_matches.to_string(),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| SimError::Io(e.into_error()))?).expect("csv output is UTF-8"))
    }
}

const CONVERGED: f64 = 0.9;

/// Runs one seeded session and returns its metrics and the finished session.
pub fn run_session(config: &SessionSimConfig, seed: u64) -> Result<(SessionRun, Session), SimError> {
    config.validate()?;
    let truth = match &config.truth {
        Some(t) => normalize(t)?,
        None => random_truth(config.items, &mut rng::stream(seed, &[b"truth"])),
    };
    let session_config = SessionConfig {
        seed,
        particles: config.particles,
        comparison_budget: config.budget,
        // keep collecting to the full budget; convergence is measured, not acted on
        min_judgments: config.budget + 1,
        top_k: config.top_k,
        policy: config.policy,
        ..SessionConfig::default()
    };
    let facilitator = ParticipantId::new("facilitator");
    let mut session = Session::create(
        SessionId::new(format!("sim-{seed}")),
        session_config,
        facilitator.clone(),
        None,
    )?;
    let items: Vec<ItemId> = (0..config.items)
        .map(|i| session.submit_idea(&facilitator, &format!("item {i}"), None))
        .collect::<Result<_, _>>()?;
    let judges: Vec<SyntheticAgent> = (0..config.agents)
        .map(|a| SyntheticAgent::new(a as u32, &truth))
        .collect::<Result<_, _>>()?;
    // An agent that has judged every pair once rejoins under a fresh
    // reviewer identity, so small item sets can still use the full budget.
    let identity = |a: usize, round: u32| ParticipantId::new(format!("agent-{a}-r{round}"));
    let mut rounds = vec![0u32; config.agents];
    for a in 0..config.agents {
        session.join(identity(a, 0), None)?;
    }
    session.change_phase(Phase::Reviewing)?;

    let mut choice_rngs: Vec<_> = (0..config.agents)
        .map(|a| rng::stream(seed, &[b"agent", &(a as u64).to_le_bytes()]))
        .collect();
    let index_of = |id: &ItemId| items.iter().position(|x| x == id).expect("session items");
    let mut convergence_epoch = None;
    let mut step = 0u64;
    'collect: loop {
        for (a, judge) in judges.iter().enumerate() {
            if session.judgment_count() >= config.budget {
                break 'collect;
            }
            step += 1;
            let task_seed = rng::child_seed(seed, &[b"task", &step.to_le_bytes()]);
            let mut outcome = session.next_task(&identity(a, rounds[a]), task_seed)?;
            if outcome == TaskOutcome::NoEligiblePairs {
                rounds[a] += 1;
                session.join(identity(a, rounds[a]), None)?;
                outcome = session.next_task(&identity(a, rounds[a]), task_seed)?;
            }
            let task = match outcome {
                TaskOutcome::Assigned(task) => task,
                TaskOutcome::NoEligiblePairs | TaskOutcome::AwaitingConvergence => break 'collect,
            };
            let (i, j) = (index_of(&task.first), index_of(&task.second));
            let (winner, loser) = if judge.prefers(i, j, &mut choice_rngs[a]) {
                (&task.first, &task.second)
            } else {
                (&task.second, &task.first)
            };
            let voice = session.record_judgment(&identity(a, rounds[a]), winner, loser)?;
            if convergence_epoch.is_none() && voice.convergence >= CONVERGED {
                convergence_epoch = Some(voice.epoch);
            }
        }
    }

    let means = session.posterior().means()?;
    let scores: Vec<f64> = items
        .iter()
        .map(|id| means.get(id).expect("posterior covers items"))
        .collect();
    let argmax = |v: &[f64]| (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).expect("non-empty");
    let replayed = Session::replay_jsonl(session.export().events_jsonl.as_bytes())?;
    let state_hash = session.state_hash();
    let run = SessionRun {
        seed,
        kendall_tau: kendall_tau(&scores, &truth),
        top1_match: argmax(&scores) == argmax(&truth),
        judgments: session.judgment_count(),
        convergence_epoch,
        events: session.events().len(),
        replay_matches: replayed.state_hash() == state_hash,
        state_hash,
        truth,
        scores,
    };
    Ok((run, session))
}

/// Runs every seed in parallel and aggregates in seed order.
pub fn run_session_experiment(config: &SessionSimConfig) -> Result<SessionReport, SimError> {
    config.validate()?;
    let runs: Vec<SessionRun> = (config.base_seed..config.base_seed + config.seeds)
        .into_par_iter()
        .map(|seed| run_session(config, seed).map(|(run, _)| run))
        .collect::<Result<_, _>>()?;
    let taus: Vec<f64> = runs.iter().map(|r| r.kendall_tau).collect();
    let judgments: Vec<f64> = runs.iter().map(|r| r.judgments as f64).collect();
    let epochs: Vec<f64> = runs
        .iter()
        .filter_map(|r| r.convergence_epoch.map(|e| e as f64))
        .collect();
    Ok(SessionReport {
        config: config.clone(),
        aggregate: SessionAggregate {
            kendall_tau: Summary::of(&taus),
            judgments: Summary::of(&judgments),
            convergence_epoch: Summary::of(&epochs),
            top1_matches: runs.iter().filter(|r| r.top1_match).count(),
        },
        runs,
    })
}
