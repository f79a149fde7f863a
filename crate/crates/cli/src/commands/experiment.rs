//! `experiment`: run a full sweep (error sweep, risk sweep, or selection
//! overlap grid) from a config file plus flag overrides, writing a CSV
//! table, an optional SVG chart, and a manifest into the output directory.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;

use modalsense::datasets::io::SnapshotFormat;
use modalsense::datasets::{AmplitudeParam, HarmonicConfig, NoiseModel};
use modalsense::experiments::{
    error_sweep_table, render_svg_lines, run_dice_grid, run_error_sweep, run_risk_sweep,
    DataSource, ExperimentConfig, Method, QdeimModeRule, Table,
};

use crate::config::{parse_f64_list, parse_u64_list, parse_usize_list, RunConfig};
use crate::errors::CliError;
use crate::manifest::RunManifest;

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Config file (`[section]` / `key = value`); flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Which sweep to run: error_sweep, risk_sweep, or dice.
    #[arg(long)]
    pub kind: Option<String>,
    /// Worker threads for the sweep (default: all cores). Results are
    /// identical at any thread count.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Directory for the CSV/SVG/manifest outputs.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Also render the table as an SVG line chart.
    #[arg(long)]
    pub svg: bool,
    /// Noise standard deviation override.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Seed list override (error sweep), e.g. "0,1,2".
    #[arg(long)]
    pub seeds: Option<String>,
    /// Mode-count override: "a..b" or comma list.
    #[arg(long)]
    pub modes: Option<String>,
    /// Sensor-count override: "a..b" or comma list (error sweep).
    #[arg(long)]
    pub sensors: Option<String>,
    /// Method list override (error sweep), e.g. "greedy_d_map,qdeim".
    #[arg(long)]
    pub methods: Option<String>,
    /// Exhaustive-search budget override (error sweep).
    #[arg(long)]
    pub budget: Option<u64>,
    /// How the interpolation baseline treats the mode axis:
    /// track_sensors or sweep_modes.
    #[arg(long)]
    pub qdeim_rule: Option<String>,
    /// Sensor count override (risk sweep and dice grid).
    #[arg(long)]
    pub k: Option<usize>,
    /// Noise grid override for the dice kind, e.g. "1e-4,1e-2,1".
    #[arg(long)]
    pub sigmas: Option<String>,
}

/// Baked-in defaults for every config key; the file and then the flags are
/// layered on top.
fn default_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.set("experiment.kind", "error_sweep");
    cfg.set("experiment.methods", "greedy_d_map,qdeim");
    cfg.set("experiment.modes", "20");
    cfg.set("experiment.sensors", "4,5,6,8,10");
    cfg.set("experiment.seeds", "0,1,2");
    cfg.set("experiment.budget", "1000000");
    cfg.set("experiment.qdeim_rule", "track_sensors");
    cfg.set("dataset.source", "harmonic");
    cfg.set("dataset.grid", "40");
    cfg.set("dataset.terms", "20");
    cfg.set("dataset.samples", "1000");
    cfg.set("dataset.train_fraction", "0.75");
    cfg.set("dataset.seed", "0");
    cfg.set("dataset.amplitude", "std_dev");
    cfg.set("noise.sigma", "0.1");
    cfg.set("risk_sweep.k", "5");
    cfg.set("risk_sweep.modes", "1..30");
    cfg.set("risk_sweep.seed", "0");
    cfg.set("dice.k", "5");
    cfg.set("dice.modes", "5..30");
    cfg.set("dice.sigmas", "0.0001");
    cfg
}

/// defaults < config file < flags, all through the same key space.
fn resolve_config(args: &ExperimentArgs) -> Result<RunConfig, CliError> {
    let mut cfg = default_config();
    if let Some(path) = &args.config {
        let file_cfg = RunConfig::from_file(path)?;
        for (key, value) in file_cfg.entries() {
            cfg.set(key, value.clone());
        }
    }
    let flag_overrides: [(&str, Option<String>); 9] = [
        ("experiment.kind", args.kind.clone()),
        ("noise.sigma", args.sigma.map(|s| s.to_string())),
        ("experiment.seeds", args.seeds.clone()),
        ("experiment.modes", args.modes.clone()),
        ("experiment.sensors", args.sensors.clone()),
        ("experiment.methods", args.methods.clone()),
        ("experiment.budget", args.budget.map(|b| b.to_string())),
        ("experiment.qdeim_rule", args.qdeim_rule.clone()),
        ("dice.sigmas", args.sigmas.clone()),
    ];
    for (key, value) in flag_overrides {
        if let Some(v) = value {
            cfg.set(key, v);
        }
    }
    if let Some(k) = args.k {
        cfg.set("risk_sweep.k", k.to_string());
        cfg.set("dice.k", k.to_string());
        // The flag also narrows an error sweep to one sensor count.
        cfg.set("experiment.sensors", k.to_string());
    }
    if let Some(m) = &args.modes {
        cfg.set("risk_sweep.modes", m.clone());
        cfg.set("dice.modes", m.clone());
    }
    Ok(cfg)
}

fn get(cfg: &RunConfig, key: &str) -> Result<String, CliError> {
    cfg.get(key)
        .map(str::to_string)
        .ok_or_else(|| CliError::usage(format!("missing config value '{key}'")))
}

fn parse_key<T: FromStr>(cfg: &RunConfig, key: &str) -> Result<T, CliError> {
    let raw = get(cfg, key)?;
    raw.parse::<T>()
        .map_err(|_| CliError::usage(format!("config '{key}': cannot parse '{raw}'")))
}

/// Builds the data source described by the `[dataset]` section.
fn build_data_source(cfg: &RunConfig) -> Result<DataSource, CliError> {
    let source = get(cfg, "dataset.source")?;
    match source.as_str() {
        "harmonic" => {
            let amplitude = match get(cfg, "dataset.amplitude")?.as_str() {
                "std_dev" | "std-dev" => AmplitudeParam::StdDev,
                "variance" => AmplitudeParam::Variance,
                other => {
                    return Err(CliError::usage(format!(
                        "dataset.amplitude: unknown value '{other}'"
                    )))
                }
            };
            Ok(DataSource::Harmonic(HarmonicConfig {
                n_grid: parse_key(cfg, "dataset.grid")?,
                n_terms: parse_key(cfg, "dataset.terms")?,
                n_samples: parse_key(cfg, "dataset.samples")?,
                train_fraction: parse_key(cfg, "dataset.train_fraction")?,
                seed: parse_key(cfg, "dataset.seed")?,
                amplitude_param: amplitude,
            }))
        }
        "file" => {
            let path = PathBuf::from(get(cfg, "dataset.path").map_err(|_| {
                CliError::usage("dataset.source = file needs dataset.path".to_string())
            })?);
            let format = cfg.get("dataset.format").unwrap_or("csv");
            let format = SnapshotFormat::from_str(format).map_err(CliError::usage)?;
            Ok(DataSource::File {
                path,
                format,
                train_fraction: parse_key(cfg, "dataset.train_fraction")?,
            })
        }
        other => Err(CliError::usage(format!(
            "dataset.source: unknown value '{other}' (expected harmonic or file)"
        ))),
    }
}

fn parse_methods(raw: &str) -> Result<Vec<Method>, CliError> {
    raw.split(',')
        .map(|piece| Method::from_str(piece.trim()).map_err(CliError::from))
        .collect()
}

/// Runs one experiment kind against a resolved config and writes
/// `<kind>.csv` (+ `.svg`, + `<kind>_manifest.json`) into `out_dir`.
pub fn execute(
    cfg: &RunConfig,
    out_dir: &Path,
    svg: bool,
    jobs: Option<usize>,
) -> Result<(), CliError> {
    let kind = get(cfg, "experiment.kind")?;
    let (mut manifest, started) = RunManifest::new("experiment");
    manifest.record_config(cfg.entries());
    manifest
        .notes
        .push("dataset split keeps the leading train_fraction of columns".to_string());

    let dataset = build_data_source(cfg)?;
    if let DataSource::File { path, .. } = &dataset {
        manifest.record_input(path);
    }
    let noise = NoiseModel::new(parse_key(cfg, "noise.sigma")?)?;

    let run = || -> Result<(Table, Vec<u64>, &'static str, &'static str, &'static str), CliError> {
        match kind.as_str() {
            "error_sweep" => {
                let seeds = parse_u64_list(&get(cfg, "experiment.seeds")?, "experiment.seeds")?;
                let rule = match get(cfg, "experiment.qdeim_rule")?.as_str() {
                    "track_sensors" => QdeimModeRule::TrackSensors,
                    "sweep_modes" => QdeimModeRule::SweepModes,
                    other => {
                        return Err(CliError::usage(format!(
                            "experiment.qdeim_rule: unknown value '{other}' \
                             (expected track_sensors or sweep_modes)"
                        )))
                    }
                };
                let config = ExperimentConfig {
                    dataset: dataset.clone(),
                    noise,
                    methods: parse_methods(&get(cfg, "experiment.methods")?)?,
                    mode_range: parse_usize_list(
                        &get(cfg, "experiment.modes")?,
                        "experiment.modes",
                    )?,
                    sensor_range: parse_usize_list(
                        &get(cfg, "experiment.sensors")?,
                        "experiment.sensors",
                    )?,
                    seeds: seeds.clone(),
                    brute_budget: parse_key(cfg, "experiment.budget")?,
                    qdeim_mode_rule: rule,
                };
                let rows = run_error_sweep(&config)?;
                Ok((
                    error_sweep_table(&rows),
                    seeds,
                    "k",
                    "mean_rel_error",
                    "method",
                ))
            }
            "risk_sweep" => {
                let seed: u64 = parse_key(cfg, "risk_sweep.seed")?;
                let table = run_risk_sweep(
                    &dataset,
                    parse_key(cfg, "risk_sweep.k")?,
                    &parse_usize_list(&get(cfg, "risk_sweep.modes")?, "risk_sweep.modes")?,
                    seed,
                    &noise,
                )?;
                Ok((table, vec![seed], "n", "delta_noise", "k"))
            }
            "dice" => {
                let table = run_dice_grid(
                    &dataset,
                    parse_key(cfg, "dice.k")?,
                    &parse_usize_list(&get(cfg, "dice.modes")?, "dice.modes")?,
                    &parse_f64_list(&get(cfg, "dice.sigmas")?, "dice.sigmas")?,
                )?;
                let seed: u64 = parse_key(cfg, "dataset.seed")?;
                Ok((table, vec![seed], "n", "dice", "sigma"))
            }
            other => Err(CliError::usage(format!(
                "experiment.kind: unknown value '{other}' \
                 (expected error_sweep, risk_sweep, or dice)"
            ))),
        }
    };

    // A custom pool caps the sweep's parallelism without touching the
    // global pool; the result is thread-count independent either way.
    let (table, seeds, x_col, y_col, group_col) = match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::usage(format!("cannot build a {n}-thread pool: {e}")))?;
            pool.install(run)?
        }
        None => run()?,
    };
    manifest.seeds = seeds;

    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(format!("{kind}.csv"));
    std::fs::write(&csv_path, table.to_csv())?;
    manifest.record_output(&csv_path);
    if svg {
        let svg_path = out_dir.join(format!("{kind}.svg"));
        render_svg_lines(&table, x_col, y_col, group_col, &svg_path)?;
        manifest.record_output(&svg_path);
    }

    let manifest_path = out_dir.join(format!("{kind}_manifest.json"));
    manifest.finish(started, &manifest_path)?;

    println!(
        "{kind}: {} rows -> {}",
        table.n_rows(),
        csv_path.display()
    );
    Ok(())
}

pub fn run(args: ExperimentArgs) -> Result<(), CliError> {
    let cfg = resolve_config(&args)?;
    execute(&cfg, &args.out_dir, args.svg, args.jobs)
}
