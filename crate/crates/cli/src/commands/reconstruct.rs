//! `reconstruct`: estimate full states from point samples of snapshot
//! columns. Measurements are read off each data column at the selected
//! sensor rows; estimates are written as an N×p matrix aligned with the
//! input columns.

use std::path::PathBuf;

use clap::Args;
use nalgebra::DMatrix;

use modalsense::datasets::io::{load_snapshots, save_matrix, SnapshotFormat};
use modalsense::datasets::NoiseModel;
use modalsense::estimate::{build_posterior, deim_estimate, map_estimate, relative_error};
use modalsense::experiments::table::{Cell, Table};

use crate::errors::CliError;
use crate::manifest::RunManifest;

use super::generate::{format_name, parse_format, with_manifest_suffix};
use super::{load_basis, load_prior, load_selection};

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Estimator: deim (interpolation / least squares) or map
    /// (posterior mean).
    #[arg(long)]
    pub method: String,
    /// Basis file (CSV, kind=basis).
    #[arg(long)]
    pub basis: PathBuf,
    /// Optional training-mean file; omit when the basis was built on
    /// uncentered data.
    #[arg(long)]
    pub mean: Option<PathBuf>,
    /// Selection file (CSV, kind=selection).
    #[arg(long)]
    pub selection: PathBuf,
    /// Snapshot matrix whose columns are sampled at the selected rows.
    #[arg(long)]
    pub data: PathBuf,
    /// Encoding of the data file.
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    pub data_format: SnapshotFormat,
    /// Truth states for the error table; defaults to the data file itself.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Prior covariance file (map only).
    #[arg(long)]
    pub prior: Option<PathBuf>,
    /// Noise standard deviation (map only).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Where to write the N×p estimate matrix (CSV, kind=estimates).
    #[arg(long)]
    pub out_estimates: PathBuf,
    /// Optionally write a per-sample relative-error table.
    #[arg(long)]
    pub out_errors: Option<PathBuf>,
    /// Manifest path (default: <out-estimates>.manifest.json).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn run(args: ReconstructArgs) -> Result<(), CliError> {
    let (mut manifest, started) = RunManifest::new("reconstruct");
    manifest.record_input(&args.basis);
    manifest.record_input(&args.selection);
    manifest.record_input(&args.data);

    let basis = load_basis(&args.basis, args.mean.as_deref())?;
    if let Some(mean) = &args.mean {
        manifest.record_input(mean);
    }
    let sel = load_selection(&args.selection, basis.phi.nrows())?;
    let data = load_snapshots(&args.data, args.data_format)?;
    if data.n_dims() != basis.phi.nrows() {
        return Err(CliError::usage(format!(
            "data has {} rows but the basis expects {}",
            data.n_dims(),
            basis.phi.nrows()
        )));
    }
    let truth = match &args.truth {
        Some(path) => {
            manifest.record_input(path);
            let t = load_snapshots(path, args.data_format)?;
            if t.n_dims() != data.n_dims() || t.n_samples() != data.n_samples() {
                return Err(CliError::usage(format!(
                    "truth is {}x{} but the data is {}x{}",
                    t.n_dims(),
                    t.n_samples(),
                    data.n_dims(),
                    data.n_samples()
                )));
            }
            t
        }
        None => data.clone(),
    };

    // The MAP posterior depends only on (basis, selection, prior, sigma), so
    // it is assembled once and reused across every column.
    let posterior = match args.method.as_str() {
        "map" => {
            let prior_path = args.prior.as_ref().ok_or_else(|| {
                CliError::usage("--method map needs --prior".to_string())
            })?;
            let sigma = args
                .sigma
                .ok_or_else(|| CliError::usage("--method map needs --sigma".to_string()))?;
            manifest.record_input(prior_path);
            let prior = load_prior(prior_path)?;
            let noise = NoiseModel::new(sigma)?;
            Some(build_posterior(&basis, &sel, &prior, &noise)?)
        }
        "deim" => None,
        other => {
            return Err(CliError::usage(format!(
                "unknown estimator '{other}' (expected deim or map)"
            )))
        }
    };

    let p = data.n_samples();
    let mut estimates = DMatrix::zeros(data.n_dims(), p);
    let mut errors = Table::new(vec!["sample", "rel_error"]);
    for j in 0..p {
        let u = data.data.column(j).into_owned();
        let y = sel.gather_vec(&u)?;
        let est = match &posterior {
            Some(post) => map_estimate(post, &basis, &y)?,
            None => deim_estimate(&basis, &sel, &y)?,
        };
        estimates.set_column(j, &est.full_state);
        let t = truth.data.column(j).into_owned();
        let rel = relative_error(&est, &t)?;
        errors
            .push_row(vec![Cell::Int(j as i64), Cell::Num(rel)])
            .map_err(CliError::from)?;
    }

    save_matrix(
        &estimates,
        &args.out_estimates,
        SnapshotFormat::Csv,
        Some("estimates"),
    )?;
    manifest.record_output(&args.out_estimates);
    if let Some(err_path) = &args.out_errors {
        std::fs::write(err_path, errors.to_csv())?;
        manifest.record_output(err_path);
    }

    for (key, value) in [
        ("reconstruct.method", args.method.clone()),
        ("dataset.path", args.data.display().to_string()),
        ("dataset.format", format_name(args.data_format).to_string()),
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
        .unwrap_or_else(|| with_manifest_suffix(&args.out_estimates));
    manifest.finish(started, &manifest_path)?;

    let err_col = errors
        .rows()
        .iter()
        .filter_map(|r| r[1].as_f64())
        .collect::<Vec<_>>();
    let mean_err = err_col.iter().sum::<f64>() / err_col.len().max(1) as f64;
    println!(
        "reconstructed {} samples, mean relative error {mean_err:.6}",
        p
    );
    Ok(())
}
