//! File-based entry points: offline fitting and bandit experiments.

use std::io::Read;

use serde::Deserialize;

use gci_core::judgment::{fit_scores, ItemId};
use gci_core::regret::{run_regret_experiment, ExperimentConfig, ExperimentResult};
use gci_core::{ComparisonTally, ScoreVector};

use crate::SimError;

/// One row of the comparison CSV (`winner,loser,reviewer,timestamp`).
#[derive(Debug, Deserialize)]
struct ComparisonRow {
    winner: String,
    loser: String,
    #[serde(default)]
    #[allow(dead_code)]
    reviewer: Option<String>,
    #[serde(default)]
    #[allow(dead_code)]
    timestamp: Option<String>,
}

/// Reads a comparison CSV into a tally.
pub fn read_comparisons<R: Read>(input: R) -> Result<ComparisonTally, SimError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut tally = ComparisonTally::new();
    for row in reader.deserialize::<ComparisonRow>() {
        let row = row?;
        tally.record(&ItemId::new(row.winner), &ItemId::new(row.loser))?;
    }
    Ok(tally)
}

/// Fits strengths to the comparisons in a CSV.
pub fn fit_csv<R: Read>(input: R, epsilon: f64) -> Result<ScoreVector, SimError> {
    Ok(fit_scores(&read_comparisons(input)?, epsilon)?)
}

/// Parses a bandit experiment config; unknown fields are rejected.
pub fn parse_bandit_config(text: &str) -> Result<ExperimentConfig, SimError> {
    let config: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| SimError::InvalidConfig(format!("bandit config: {e}")))?;
    config
        .validate()
        .map_err(|e| SimError::InvalidConfig(format!("bandit config: {e}")))?;
    Ok(config)
}

pub fn run_bandit(config: &ExperimentConfig) -> Result<ExperimentResult, SimError> {
    Ok(run_regret_experiment(config)?)
}

/// `epoch,agent,arm,reward,cum_regret` rows.
pub fn regret_csv(result: &ExperimentResult) -> Result<String, SimError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "agent", "arm", "reward", "cum_regret"])?;
    for r in &result.records {
        w.write_record([
            r.epoch.to_string(),
            r.agent.to_string(),
            r.arm.to_string(),
            r.reward.to_string(),
            r.cum_regret.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| SimError::Io(e.into_error()))?).expect("csv output is UTF-8"))
}
