//! Experiment runner for the iteration framework: config-driven solver
//! runs, smoothing-family verification, counterexample measurements and
//! velocity benchmarks.
//!
//! Exit codes: 0 success, 1 assertion or convergence failure, 2 usage or
//! configuration error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nmh_cli::commands;
use nmh_cli::config::OutputFormat;

#[derive(Parser)]
#[command(name = "nmh", version, about = "Iteration experiments on spectral lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Experiment configuration file (JSON)
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Directory for report files; defaults to the config's own setting
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Restrict report files to one format
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate iteration parameters and print the derived-constant ledger
    ParamsCheck {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
    },
    /// Measure smoothing-family constants and evaluate configured checks
    VerifySmoothing {
        #[command(flatten)]
        common: CommonArgs,
        /// Override the seed of random test sets
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
    },
    /// Execute the iteration and write the step table and summary
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Override the data seed from the config
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
        /// Treat the config as a sweep document and run members in parallel
        #[arg(long)]
        sweep: bool,
    },
    /// Build a separating example and assert its fitted slopes
    Counterexample {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Fit extra loss exponents for configured velocity laws
    VelocityBench {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::ParamsCheck { config } => commands::params_check::exec(&config),
        Command::VerifySmoothing { common, seed } => commands::verify_smoothing::exec(
            &common.config,
            common.out.as_deref(),
            common.format,
            seed,
        ),
        Command::Run { common, seed, sweep } => commands::run::exec(
            &common.config,
            common.out.as_deref(),
            common.format,
            seed,
            sweep,
        ),
        Command::Counterexample { common } => commands::counterexample::exec(
            &common.config,
            common.out.as_deref(),
            common.format,
        ),
        Command::VelocityBench { common } => commands::velocity_bench::exec(
            &common.config,
            common.out.as_deref(),
            common.format,
        ),
    };
    ExitCode::from(code)
}
