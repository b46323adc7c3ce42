//! `ps-whittle`: index tables, simulations and exact baselines from a TOML config.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use commands::PolicyName;
use config::{Overrides, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "ps-whittle", version, about = "Whittle index scheduling for processor-sharing queues")]
struct Cli {
    /// TOML system configuration (not needed for `properties`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Number of seeds; runs use seeds 1..=n.
    #[arg(long, global = true)]
    seeds: Option<u64>,
    #[arg(long, global = true)]
    horizon: Option<u64>,
    #[arg(long, global = true)]
    burn_in: Option<u64>,
    /// Largest state with a computed index.
    #[arg(long, global = true)]
    x_max: Option<usize>,
    /// Step size of the index iteration.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Stopping tolerance of the index iteration.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Truncation of the index linear system.
    #[arg(long, global = true)]
    truncation_n: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the configuration and report any violations.
    Validate,
    /// Compute per-server Whittle index tables.
    Indices,
    /// Simulate one policy.
    Simulate {
        #[arg(long, value_enum, default_value = "whittle")]
        policy: PolicyName,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Reuse an index table written by `indices` instead of recomputing it.
        #[arg(long)]
        indices: Option<PathBuf>,
    },
    /// Simulate every policy over all seeds, with the exact policy when tractable.
    Compare,
    /// Solve the joint average-cost problem by relative value iteration.
    Exact,
    /// Run the structural property suite.
    Properties,
}

fn manifest(cli: &Cli) -> anyhow::Result<RunManifest> {
    let path = cli.config.as_ref().context("--config is required for this command")?;
    let file = config::load(path)?;
    let overrides = Overrides {
        seeds: cli.seeds,
        horizon: cli.horizon,
        burn_in: cli.burn_in,
        x_max: cli.x_max,
        gamma: cli.gamma,
        tol: cli.tol,
        truncation_n: cli.truncation_n,
    };
    RunManifest::new(path, &cli.out, file, &overrides)
}

fn run(cli: &Cli) -> anyhow::Result<commands::Outcome> {
    match &cli.command {
        Command::Properties => commands::properties(&cli.out),
        Command::Validate => commands::validate(&manifest(cli)?),
        Command::Indices => commands::indices(&manifest(cli)?),
        Command::Simulate { policy, seed, indices } => {
            commands::simulate_one(&manifest(cli)?, *policy, *seed, indices.as_deref())
        }
        Command::Compare => commands::compare_all(&manifest(cli)?),
        Command::Exact => commands::exact(&manifest(cli)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            for f in &outcome.files {
                eprintln!("wrote {}", f.display());
            }
            if outcome.ok {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: some checks failed");
                ExitCode::FAILURE
            }
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            match err.downcast_ref::<ps_whittle::Error>() {
                Some(ps_whittle::Error::Usage(_)) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
