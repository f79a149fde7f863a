//! `risk`: compare the deterministic and posterior-mean estimators on one
//! measurement map. The map comes either from an explicit k×n matrix or
//! from a basis plus a selection; the report is one CSV row of closed-form
//! risks, premium terms, and bounds.

use std::path::PathBuf;

use clap::Args;

use modalsense::datasets::io::{load_matrix, SnapshotFormat};
use modalsense::datasets::NoiseModel;
use modalsense::risk::risk_report;

use crate::errors::CliError;
use crate::manifest::RunManifest;

use super::generate::with_manifest_suffix;
use super::{load_basis, load_prior, load_selection};

#[derive(Debug, Args)]
pub struct RiskArgs {
    /// Explicit k×n measurement map (CSV); mutually exclusive with
    /// --basis/--selection.
    #[arg(
        long,
        conflicts_with_all = ["basis", "selection"],
        required_unless_present = "basis"
    )]
    pub explicit_a: Option<PathBuf>,
    /// Basis file; the map is the selected rows of the basis.
    #[arg(long, requires = "selection", required_unless_present = "explicit_a")]
    pub basis: Option<PathBuf>,
    /// Selection file naming the measured rows.
    #[arg(long, requires = "basis")]
    pub selection: Option<PathBuf>,
    /// Prior covariance file.
    #[arg(long)]
    pub prior: PathBuf,
    /// Noise standard deviation.
    #[arg(long)]
    pub sigma: f64,
    /// Where to write the one-row report CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Manifest path (default: <out>.manifest.json).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn run(args: RiskArgs) -> Result<(), CliError> {
    let (mut manifest, started) = RunManifest::new("risk");

    let a = match (&args.explicit_a, &args.basis, &args.selection) {
        (Some(a_path), _, _) => {
            manifest.record_input(a_path);
            let (a, _kind) = load_matrix(a_path, SnapshotFormat::Csv)?;
            a
        }
        (None, Some(basis_path), Some(sel_path)) => {
            manifest.record_input(basis_path);
            manifest.record_input(sel_path);
            let basis = load_basis(basis_path, None)?;
            let sel = load_selection(sel_path, basis.phi.nrows())?;
            sel.gather_rows(&basis.phi)?
        }
        _ => {
            return Err(CliError::usage(
                "pass either --explicit-a or both --basis and --selection".to_string(),
            ))
        }
    };

    manifest.record_input(&args.prior);
    let prior = load_prior(&args.prior)?;
    let noise = NoiseModel::new(args.sigma)?;
    let report = risk_report(&a, &prior, &noise)?;

    let mut csv = String::new();
    csv.push_str(modalsense::risk::RiskReport::CSV_HEADER);
    csv.push('\n');
    csv.push_str(&report.csv_row());
    csv.push('\n');
    std::fs::write(&args.out, csv)?;
    manifest.record_output(&args.out);

    manifest
        .config
        .insert("noise.sigma".to_string(), args.sigma.to_string());
    let manifest_path = args
        .manifest
        .unwrap_or_else(|| with_manifest_suffix(&args.out));
    manifest.finish(started, &manifest_path)?;

    println!(
        "risk_ls = {}, risk_map = {}, premium = {} (delta_prior = {}, delta_noise = {})",
        report.risk_ls, report.risk_map, report.premium, report.delta_prior, report.delta_noise
    );
    Ok(())
}
