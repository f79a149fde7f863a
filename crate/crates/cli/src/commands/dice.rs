//! `dice`: shorthand for `experiment --kind dice` — the overlap grid
//! between the pivoted-QR posterior placement and the greedy D-optimal
//! placement across mode counts and noise levels.

use std::path::PathBuf;

use clap::Args;

use crate::errors::CliError;

use super::experiment::{self, ExperimentArgs};

#[derive(Debug, Args)]
pub struct DiceArgs {
    /// Config file (`[section]` / `key = value`); flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Sensor count for both placements.
    #[arg(long)]
    pub k: Option<usize>,
    /// Mode counts: "a..b" or comma list.
    #[arg(long)]
    pub modes: Option<String>,
    /// Noise grid, e.g. "1e-4,1e-2,1".
    #[arg(long)]
    pub sigmas: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Directory for the CSV/SVG/manifest outputs.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Also render the grid as an SVG line chart.
    #[arg(long)]
    pub svg: bool,
}

pub fn run(args: DiceArgs) -> Result<(), CliError> {
    experiment::run(ExperimentArgs {
        config: args.config,
        kind: Some("dice".to_string()),
        jobs: args.jobs,
        out_dir: args.out_dir,
        svg: args.svg,
        sigma: None,
        seeds: None,
        modes: args.modes,
        sensors: None,
        methods: None,
        budget: None,
        qdeim_rule: None,
        k: args.k,
        sigmas: args.sigmas,
    })
}
