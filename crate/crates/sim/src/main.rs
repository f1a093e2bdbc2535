//! `gci`: simulations and offline fitting from the command line.
//!
//! Exit codes: 0 success, 1 data error, 2 usage error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use gci_core::deliberation::PairPolicy;
use gci_core::judgment::DEFAULT_EPSILON;
use gci_sim::{
    fit_csv, parse_bandit_config, regret_csv, run_bandit, run_session_experiment, SessionSimConfig, SimError,
};

#[derive(Debug, Parser)]
#[command(name = "gci", version, about = "Deliberation engine simulations and tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run simulations.
    Sim {
        #[command(subcommand)]
        kind: SimCommand,
    },
    /// Fit Bradley-Terry strengths to a comparison CSV and print them as JSON.
    Fit {
        /// CSV with header `winner,loser,reviewer,timestamp`.
        #[arg(long)]
        input: PathBuf,
        /// Pseudo-wins added to both directions of every compared pair.
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolicyArg {
    Adaptive,
    Roundrobin,
}

#[derive(Debug, Subcommand)]
enum SimCommand {
    /// Synthetic agents deliberate over items with a known ground truth.
    Session {
        #[arg(long)]
        items: usize,
        #[arg(long)]
        agents: usize,
        /// Judgments per run.
        #[arg(long)]
        budget: u64,
        /// Number of seeded runs.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// First seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = PolicyArg::Adaptive)]
        policy: PolicyArg,
        #[arg(long, default_value_t = gci_core::judgment::DEFAULT_PARTICLES)]
        particles: usize,
        /// Fixed ground-truth strengths, comma separated; random per seed otherwise.
        #[arg(long, value_delimiter = ',')]
        truth: Option<Vec<f64>>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Bandit regret experiment from a JSON config.
    Bandit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn write(out: &Path, name: &str, contents: &str) -> Result<PathBuf, SimError> {
    fs::create_dir_all(out)?;
    let path = out.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn run(command: Command) -> Result<(), SimError> {
    match command {
        Command::Fit { input, epsilon } => {
            let file = fs::File::open(&input)?;
            let scores = fit_csv(file, epsilon)?;
            println!("{}", serde_json::to_string_pretty(&scores)?);
        }
        Command::Sim {
            kind:
                SimCommand::Session {
                    items,
                    agents,
                    budget,
                    seeds,
                    seed,
                    policy,
                    particles,
                    truth,
                    out,
                },
        } => {
            let config = SessionSimConfig {
                base_seed: seed,
                policy: match policy {
                    PolicyArg::Adaptive => PairPolicy::Adaptive,
                    PolicyArg::Roundrobin => PairPolicy::RoundRobin,
                },
                particles,
                truth,
                ..SessionSimConfig::new(items, agents, budget, seeds)
            };
            let report = run_session_experiment(&config)?;
            let json = serde_json::to_string_pretty(&report)?;
            let json_path = write(&out, "session_report.json", &json)?;
            let csv_path = write(&out, "session_runs.csv", &report.to_csv()?)?;
            println!("{}", serde_json::to_string_pretty(&report.aggregate)?);
            eprintln!("wrote {} and {}", json_path.display(), csv_path.display());
        }
        Command::Sim {
            kind: SimCommand::Bandit { config, out },
        } => {
            let text = fs::read_to_string(&config)
                .map_err(|e| SimError::InvalidConfig(format!("cannot read {}: {e}", config.display())))?;
            let config = parse_bandit_config(&text)?;
            let result = run_bandit(&config)?;
            let path = write(&out, "regret.csv", &regret_csv(&result)?)?;
            let summary = serde_json::json!({
                "agents": config.agents,
                "horizon": config.horizon,
                "final_regret": result.final_regret(),
                "mean_final_regret": result.mean_final_regret(),
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}
