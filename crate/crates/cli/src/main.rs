//! Command-line front door for modal state estimation from sparse sensors:
//! dataset synthesis, basis/prior construction, sensor placement, state
//! reconstruction, closed-form risk reports, and reproducible experiment
//! sweeps.
//!
//! Every command is deterministic given its flags — all randomness flows
//! from explicit 64-bit seeds — and writes a JSON manifest recording the
//! resolved configuration, seeds, inputs, and outputs next to its results.
//!
//! Exit codes: 0 success, 2 usage or invalid input, 3 resource-guard
//! refusal, 4 numerical failure, 1 I/O trouble. Failures print a single
//! `error[<tag>]: message` line to stderr with a matching tag (usage,
//! budget, numerics, io).

mod commands;
mod config;
mod errors;
mod manifest;

use clap::{Parser, Subcommand};

use errors::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "modalsense",
    version,
    about = "Modal state estimation from sparse, noisy point measurements"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize the harmonic benchmark dataset.
    Generate(commands::generate::GenerateArgs),
    /// Build a modal basis and prior covariance from snapshots.
    Pod(commands::pod::PodArgs),
    /// Choose sensor locations for a basis.
    Place(commands::place::PlaceArgs),
    /// Estimate full states from point samples of snapshot columns.
    Reconstruct(commands::reconstruct::ReconstructArgs),
    /// Closed-form risk report for one measurement map.
    Risk(commands::risk::RiskArgs),
    /// Run a configured sweep (error_sweep, risk_sweep, or dice).
    Experiment(commands::experiment::ExperimentArgs),
    /// Selection-overlap grid (shorthand for experiment --kind dice).
    Dice(commands::dice::DiceArgs),
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(args) => commands::generate::run(args),
        Command::Pod(args) => commands::pod::run(args),
        Command::Place(args) => commands::place::run(args),
        Command::Reconstruct(args) => commands::reconstruct::run(args),
        Command::Risk(args) => commands::risk::run(args),
        Command::Experiment(args) => commands::experiment::run(args),
        Command::Dice(args) => commands::dice::run(args),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli) {
        eprintln!("error[{}]: {}", e.severity.tag(), e.message);
        std::process::exit(e.severity.exit_code());
    }
}
