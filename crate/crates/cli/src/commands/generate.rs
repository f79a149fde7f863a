//! `generate`: synthesize the harmonic benchmark dataset and write it to a
//! snapshot file. The seed fully determines every byte of the output.

use std::path::PathBuf;

use clap::Args;

use modalsense::datasets::io::{save_snapshots, SnapshotFormat};
use modalsense::datasets::{generate_harmonic, AmplitudeParam, HarmonicConfig};

use crate::errors::CliError;
use crate::manifest::RunManifest;

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Grid resolution N (state dimension).
    #[arg(long, default_value_t = 40)]
    pub grid: usize,
    /// Number of harmonic terms per sample.
    #[arg(long, default_value_t = 20)]
    pub terms: usize,
    /// Number of snapshot columns.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// RNG seed; two runs with the same seed are byte-identical.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Whether the amplitude decay law sets the standard deviation or the
    /// variance of each term.
    #[arg(long, value_parser = parse_amplitude, default_value = "std-dev")]
    pub amplitude: AmplitudeParam,
    /// Output encoding.
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    pub format: SnapshotFormat,
    /// Where to write the snapshot matrix.
    #[arg(long)]
    pub out: PathBuf,
    /// Manifest path (default: <out>.manifest.json).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn parse_format(s: &str) -> Result<SnapshotFormat, String> {
    s.parse()
}

fn parse_amplitude(s: &str) -> Result<AmplitudeParam, String> {
    match s {
        "std-dev" | "std_dev" => Ok(AmplitudeParam::StdDev),
        "variance" => Ok(AmplitudeParam::Variance),
        other => Err(format!(
            "unknown amplitude parameterization '{other}' (expected std-dev or variance)"
        )),
    }
}

pub fn amplitude_name(a: AmplitudeParam) -> &'static str {
    match a {
        AmplitudeParam::StdDev => "std-dev",
        AmplitudeParam::Variance => "variance",
    }
}

pub fn format_name(f: SnapshotFormat) -> &'static str {
    match f {
        SnapshotFormat::Csv => "csv",
        SnapshotFormat::Binary => "binary",
    }
}

pub fn run(args: GenerateArgs) -> Result<(), CliError> {
    let (mut manifest, started) = RunManifest::new("generate");
    let config = HarmonicConfig {
        n_grid: args.grid,
        n_terms: args.terms,
        n_samples: args.samples,
        seed: args.seed,
        amplitude_param: args.amplitude,
        ..HarmonicConfig::default()
    };
    let x = generate_harmonic(&config)?;
    save_snapshots(&x, &args.out, args.format)?;

    manifest.seeds.push(args.seed);
    manifest.record_output(&args.out);
    for (key, value) in [
        ("dataset.source", "harmonic".to_string()),
        ("dataset.grid", args.grid.to_string()),
        ("dataset.terms", args.terms.to_string()),
        ("dataset.samples", args.samples.to_string()),
        ("dataset.seed", args.seed.to_string()),
        ("dataset.amplitude", amplitude_name(args.amplitude).to_string()),
        ("dataset.format", format_name(args.format).to_string()),
    ] {
        manifest.config.insert(key.to_string(), value);
    }
    let manifest_path = args
        .manifest
        .unwrap_or_else(|| with_manifest_suffix(&args.out));
    manifest.finish(started, &manifest_path)?;

    println!(
        "wrote {}x{} snapshots to {}",
        x.n_dims(),
        x.n_samples(),
        args.out.display()
    );
    Ok(())
}

/// `<path>.manifest.json` next to the primary output.
pub fn with_manifest_suffix(out: &std::path::Path) -> PathBuf {
    let mut s = out.as_os_str().to_os_string();
    s.push(".manifest.json");
    PathBuf::from(s)
}
