//! `place`: choose k sensor locations for a basis with one of the four
//! placement algorithms and write the selection as a kind-tagged index
//! matrix.

use std::path::PathBuf;

use clap::Args;

use modalsense::datasets::io::{save_matrix, SnapshotFormat};
use modalsense::datasets::NoiseModel;
use modalsense::placement::{
    info_gain, place_brute_d, place_cpqr, place_greedy_d, place_qmap, theta_d, PlacementResult,
};

use crate::errors::CliError;
use crate::manifest::RunManifest;

use super::generate::with_manifest_suffix;
use super::{load_basis, load_prior, selection_to_matrix};

#[derive(Debug, Args)]
pub struct PlaceArgs {
    /// Basis file (CSV, kind=basis).
    #[arg(long)]
    pub basis: PathBuf,
    /// Placement algorithm: cpqr, qmap, greedy_d, or brute_d.
    #[arg(long)]
    pub method: String,
    /// Number of sensors to place.
    #[arg(long)]
    pub k: usize,
    /// Prior covariance file; required by qmap, greedy_d, and brute_d.
    #[arg(long)]
    pub prior: Option<PathBuf>,
    /// Noise standard deviation; required by qmap, greedy_d, and brute_d.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Cap on the number of subsets the exhaustive method may evaluate.
    #[arg(long, default_value_t = 1_000_000)]
    pub budget: u64,
    /// Where to write the selection (1×k CSV, kind=selection).
    #[arg(long)]
    pub out: PathBuf,
    /// Manifest path (default: <out>.manifest.json).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn run(args: PlaceArgs) -> Result<(), CliError> {
    let (mut manifest, started) = RunManifest::new("place");
    manifest.record_input(&args.basis);
    let basis = load_basis(&args.basis, None)?;

    // An empty selection is representable but never what the caller meant.
    if args.k == 0 {
        return Err(CliError::usage("--k must be at least 1"));
    }

    // Reject unknown method names before the prior/sigma requirement so the
    // error talks about the actual mistake.
    if !["cpqr", "qmap", "greedy_d", "brute_d"].contains(&args.method.as_str()) {
        return Err(CliError::usage(format!(
            "unknown placement method '{}' (expected cpqr, qmap, greedy_d, or brute_d)",
            args.method
        )));
    }

    // The information-based methods need a prior and a noise level; cpqr
    // does not, but reports the same objectives when both are supplied.
    let needs_prior = args.method != "cpqr";
    let prior_noise = match (&args.prior, args.sigma) {
        (Some(prior_path), Some(sigma)) => {
            manifest.record_input(prior_path);
            Some((load_prior(prior_path)?, NoiseModel::new(sigma)?))
        }
        _ if needs_prior => {
            return Err(CliError::usage(format!(
                "--method {} needs --prior (a covariance over the modes) and --sigma",
                args.method
            )))
        }
        _ => None,
    };

    let result: PlacementResult = match (args.method.as_str(), &prior_noise) {
        ("cpqr", _) => place_cpqr(&basis, args.k)?,
        ("qmap", Some((prior, noise))) => place_qmap(&basis, prior, noise, args.k)?,
        ("greedy_d", Some((prior, noise))) => {
            place_greedy_d(&basis, prior, noise, args.k, true)?
        }
        ("brute_d", Some((prior, noise))) => {
            place_brute_d(&basis, prior, noise, args.k, args.budget)?
        }
        (other, _) => {
            return Err(CliError::usage(format!(
                "unknown placement method '{other}' (expected cpqr, qmap, greedy_d, or brute_d)"
            )))
        }
    };

    save_matrix(
        &selection_to_matrix(&result.selection),
        &args.out,
        SnapshotFormat::Csv,
        Some("selection"),
    )?;
    manifest.record_output(&args.out);

    for (key, value) in [
        ("place.method", args.method.clone()),
        ("place.k", args.k.to_string()),
        ("place.budget", args.budget.to_string()),
        (
            "noise.sigma",
            args.sigma.map(|s| s.to_string()).unwrap_or_default(),
        ),
    ] {
        if !value.is_empty() {
            manifest.config.insert(key.to_string(), value);
        }
    }
    let manifest_path = args
        .manifest
        .unwrap_or_else(|| with_manifest_suffix(&args.out));

    println!("selection = {:?}", result.selection.indices());
    if let Some((prior, noise)) = &prior_noise {
        let theta = theta_d(&basis, &result.selection, prior, noise)?;
        let gain = info_gain(&basis, &result.selection, prior, noise)?;
        println!("theta_d = {theta}");
        println!("info_gain = {gain}");
    }
    manifest.finish(started, &manifest_path)?;
    Ok(())
}
