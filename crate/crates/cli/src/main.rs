//! Benchmark driver: profile landscapes, tune surrogate hyperparameters,
//! run acquisition campaigns against paired random baselines, and turn the
//! accumulated run store into ranked reports.
//!
//! Exit codes: 0 on success, 1 for configuration or validation problems,
//! 2 when some cells failed but partial output was produced.

mod commands;
mod config;

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use commands::Outcome;
use config::Overrides;

/// Pool-based optimization benchmark over finite sequence-fitness landscapes.
#[derive(Debug, Parser)]
#[command(name = "bobench", version)]
struct Cli {
    /// TOML benchmark configuration.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Landscape CSVs; overrides the configured landscape list.
    #[arg(long, global = true, value_name = "CSV")]
    data: Vec<PathBuf>,
    /// Output directory for caches, run stores, and reports.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Global seed; shifts campaign replicate seeds and data splits.
    #[arg(long, global = true, value_name = "SEED")]
    seed: Option<u64>,
    /// Keep only the best N rows per ranking file.
    #[arg(long, global = true, value_name = "N")]
    top: Option<usize>,
    /// Tune missing hyperparameter cells before running campaigns.
    #[arg(long, global = true)]
    tune: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute structural property profiles for the configured landscapes.
    Profile,
    /// Grid-search surrogate hyperparameters per (landscape, encoding).
    Tune,
    /// Run the model grid with paired random baselines, resumably.
    Run,
    /// Rank, bootstrap, and export metric tables from the run store.
    Report,
}

fn dispatch(cli: Cli) -> commands::CmdResult {
    let overrides = Overrides {
        data: cli.data,
        out: cli.out,
        jobs: cli.jobs,
        seed: cli.seed,
        top: cli.top,
    };
    let resolved = config::resolve(cli.config.as_ref(), overrides)?;
    if resolved.config.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(resolved.config.jobs)
            .build_global()
            .map_err(|e| format!("cannot size the worker pool: {e}"))?;
    }
    match cli.command {
        Command::Profile => commands::profile(&resolved),
        Command::Tune => commands::tune(&resolved),
        Command::Run => commands::run(&resolved, cli.tune),
        Command::Report => commands::report(&resolved),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage mistakes are validation errors (exit 1); --help and
            // --version are successes, not errors.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match dispatch(cli) {
        Ok(Outcome::Clean) => {}
        Ok(Outcome::Partial) => std::process::exit(2),
        Err(message) => {
            eprintln!("error: {message}");
            std::process::exit(1);
        }
    }
}
