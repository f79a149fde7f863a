//! `pod`: build an orthonormal modal basis and a prior covariance from a
//! snapshot file, and persist the pieces (basis, mean, prior, spectrum) as
//! kind-tagged CSV matrices.

use std::path::PathBuf;

use clap::Args;
use nalgebra::DMatrix;

use modalsense::datasets::io::{load_snapshots, save_matrix, SnapshotFormat};
use modalsense::datasets::split;
use modalsense::pod::{center, pod_basis, prior_preset, PriorPreset};

use crate::errors::CliError;
use crate::manifest::RunManifest;

use super::generate::{format_name, parse_format, with_manifest_suffix};

#[derive(Debug, Args)]
pub struct PodArgs {
    /// Snapshot file to train on.
    #[arg(long)]
    pub input: PathBuf,
    /// Encoding of the snapshot file.
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    pub format: SnapshotFormat,
    /// Number of modes n to retain.
    #[arg(long)]
    pub modes: usize,
    /// Keep only the leading fraction of columns for training (prefix
    /// split); omit to train on every column.
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Prior construction: pod-variance, singular-values, or
    /// identity:<scale>.
    #[arg(long, default_value = "pod-variance", value_parser = parse_preset)]
    pub prior_preset: PresetArg,
    /// Where to write the N×n basis matrix.
    #[arg(long)]
    pub out_basis: PathBuf,
    /// Where to write the N×1 training mean.
    #[arg(long)]
    pub out_mean: PathBuf,
    /// Where to write the n×n prior covariance.
    #[arg(long)]
    pub out_prior: PathBuf,
    /// Optionally write the retained singular values as an r×1 matrix.
    #[arg(long)]
    pub out_singular_values: Option<PathBuf>,
    /// Manifest path (default: <out-basis>.manifest.json).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

/// Clap-friendly mirror of [`PriorPreset`] that remembers its spelling.
#[derive(Debug, Clone)]
pub struct PresetArg {
    pub preset: PriorPreset,
    pub name: String,
}

fn parse_preset(s: &str) -> Result<PresetArg, String> {
    let preset = match s {
        "pod-variance" | "pod_variance" => PriorPreset::PodVariance,
        "singular-values" | "singular_values" => PriorPreset::SingularValues,
        other => match other.strip_prefix("identity:") {
            Some(scale) => {
                let scale: f64 = scale
                    .parse()
                    .map_err(|_| format!("identity scale '{scale}' is not a number"))?;
                PriorPreset::ScaledIdentity(scale)
            }
            None => {
                return Err(format!(
                    "unknown prior preset '{other}' (expected pod-variance, \
                     singular-values, or identity:<scale>)"
                ))
            }
        },
    };
    Ok(PresetArg {
        preset,
        name: s.to_string(),
    })
}

pub fn run(args: PodArgs) -> Result<(), CliError> {
    let (mut manifest, started) = RunManifest::new("pod");
    manifest.record_input(&args.input);

    let x = load_snapshots(&args.input, args.format)?;
    let train = match args.train_fraction {
        Some(f) => split(&x, f)?.0,
        None => x,
    };
    let centered = center(&train)?;
    let basis = pod_basis(&centered, args.modes)?;
    let prior = prior_preset(&basis, args.prior_preset.preset)?;

    save_matrix(&basis.phi, &args.out_basis, SnapshotFormat::Csv, Some("basis"))?;
    let mean = DMatrix::from_column_slice(basis.mean.len(), 1, basis.mean.as_slice());
    save_matrix(&mean, &args.out_mean, SnapshotFormat::Csv, Some("mean"))?;
    save_matrix(prior.matrix(), &args.out_prior, SnapshotFormat::Csv, Some("prior"))?;
    manifest.record_output(&args.out_basis);
    manifest.record_output(&args.out_mean);
    manifest.record_output(&args.out_prior);
    if let Some(sv_path) = &args.out_singular_values {
        let sv = DMatrix::from_column_slice(
            basis.singular_values.len(),
            1,
            basis.singular_values.as_slice(),
        );
        save_matrix(&sv, sv_path, SnapshotFormat::Csv, Some("singular_values"))?;
        manifest.record_output(sv_path);
    }

    for (key, value) in [
        ("dataset.path", args.input.display().to_string()),
        ("dataset.format", format_name(args.format).to_string()),
        (
            "dataset.train_fraction",
            args.train_fraction
                .map(|f| f.to_string())
                .unwrap_or_else(|| "none".to_string()),
        ),
        ("pod.modes", args.modes.to_string()),
        ("pod.prior_preset", args.prior_preset.name.clone()),
    ] {
        manifest.config.insert(key.to_string(), value);
    }
    manifest
        .notes
        .push("train/test split keeps the leading columns for training".to_string());
    let manifest_path = args
        .manifest
        .unwrap_or_else(|| with_manifest_suffix(&args.out_basis));
    manifest.finish(started, &manifest_path)?;

    println!(
        "basis {}x{}, prior {}x{}, trained on {} samples",
        basis.phi.nrows(),
        basis.phi.ncols(),
        prior.matrix().nrows(),
        prior.matrix().ncols(),
        basis.n_samples_used
    );
    Ok(())
}
