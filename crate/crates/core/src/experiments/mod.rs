//! Reproducible evaluation sweeps over placement methods, mode counts,
//! sensor counts, noise levels, and seeds.
//!
//! Conventions shared by every sweep:
//!
//! - Reconstruction errors are relative state errors ‖û − u‖₂/‖u‖₂ against
//!   the *noiseless* truth; noise enters only through the measurements.
//! - Each seed regenerates the dataset (for synthetic sources) and the
//!   measurement noise; noise uses its own RNG substream per test column,
//!   so datasets and noise never share randomness.
//! - The Q-DEIM baseline pairs the number of retained modes to the number
//!   of sensors (n = k) unless [`QdeimModeRule::SweepModes`] asks for the
//!   swept mode axis instead.
//! - Exhaustive-search budgets are validated against C(N, k) for every
//!   requested k before any basis or placement work starts.
//! - Cell evaluation is parallel but order-independent: rows are collected
//!   deterministically and sorted by (method, n, k, seed), so a sweep is
//!   byte-for-byte reproducible for a given configuration.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::datasets::io::{load_snapshots, SnapshotFormat};
use crate::datasets::{
    add_noise, generate_harmonic, split, DatasetError, HarmonicConfig, NoiseModel,
    SnapshotMatrix, STREAM_SELECTION_OFFSET,
};
use crate::estimate::{build_posterior, deim_estimate, map_estimate, relative_error, EstimateError};
use crate::numerics::{econ_svd, NumericsError};
use crate::placement::{
    dice, place_brute_d, place_cpqr, place_greedy_d, place_qmap, subset_count, PlacementError,
    SensorSelection,
};
use crate::pod::{center, pod_basis, prior_from_pod, ModalBasis, PodError};
use crate::risk::{null_space_prior_mass, risk_report, RiskError, RiskReport};

mod svg;
pub mod table;

pub use svg::{render_svg_lines, svg_lines_string};
pub use table::{Cell, Table};

/// Errors from experiment configuration, execution, or rendering.
#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment configuration: {reason}")]
    Config { reason: String },
    #[error("table has no column named '{column}'")]
    MissingColumn { column: String },
    #[error("nothing to plot: no row has numeric x and y plus a group label")]
    EmptyPlot,
    #[error("cannot write '{path}': {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Pod(#[from] PodError),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Where the snapshot data comes from.
///
/// For [`DataSource::Harmonic`] each sweep seed regenerates the dataset.
/// For [`DataSource::File`] the data are fixed; sweep seeds only vary the
/// measurement noise.
#[derive(Debug, Clone)]
pub enum DataSource {
    Harmonic(HarmonicConfig),
    File {
        path: PathBuf,
        format: SnapshotFormat,
        train_fraction: f64,
    },
}

impl DataSource {
    /// Loads or generates the data and applies the prefix train/test split.
    /// `seed_override` replaces the synthetic generator's seed; it is
    /// ignored for file sources.
    fn load(&self, seed_override: Option<u64>) -> Result<(SnapshotMatrix, SnapshotMatrix), ExperimentError> {
        match self {
            DataSource::Harmonic(cfg) => {
                let mut cfg = *cfg;
                if let Some(seed) = seed_override {
                    cfg.seed = seed;
                }
                let x = generate_harmonic(&cfg)?;
                Ok(split(&x, cfg.train_fraction)?)
            }
            DataSource::File {
                path,
                format,
                train_fraction,
            } => {
                let x = load_snapshots(path, *format)?;
                Ok(split(&x, *train_fraction)?)
            }
        }
    }

    /// The state dimension, loading the file header if necessary.
    fn n_locations(&self) -> Result<usize, ExperimentError> {
        match self {
            DataSource::Harmonic(cfg) => Ok(cfg.n_grid),
            DataSource::File { .. } => Ok(self.load(None)?.0.n_dims()),
        }
    }
}

/// A placement method paired with its estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    /// Exhaustive D-optimal placement, posterior-mean reconstruction.
    DMap,
    /// Greedy D-optimal placement, posterior-mean reconstruction.
    GreedyDMap,
    /// Pivoted-QR placement on Φᵀ, interpolation reconstruction.
    Qdeim,
    /// Pivoted-QR placement on the prior-whitened map, posterior-mean
    /// reconstruction.
    Qmap,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::DMap => "d_map",
            Method::GreedyDMap => "greedy_d_map",
            Method::Qdeim => "qdeim",
            Method::Qmap => "qmap",
        }
    }

    pub const ALL: [Method; 4] = [Method::DMap, Method::GreedyDMap, Method::Qdeim, Method::Qmap];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| ExperimentError::Config {
                reason: format!(
                    "unknown method '{s}' (expected one of d_map, greedy_d_map, qdeim, qmap)"
                ),
            })
    }
}

/// How the swept mode axis applies to the Q-DEIM baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QdeimModeRule {
    /// One Q-DEIM row per sensor count with n = k (the interpolation
    /// regime where the method is square); the mode axis is ignored.
    #[default]
    TrackSensors,
    /// Sweep the mode axis like every other method.
    SweepModes,
}

/// Full specification of an error sweep.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dataset: DataSource,
    pub noise: NoiseModel,
    pub methods: Vec<Method>,
    /// Mode counts n to sweep.
    pub mode_range: Vec<usize>,
    /// Sensor counts k to sweep.
    pub sensor_range: Vec<usize>,
    /// Each seed regenerates data (synthetic sources) and noise.
    pub seeds: Vec<u64>,
    /// Cap on C(N, k) for the exhaustive method.
    pub brute_budget: u64,
    pub qdeim_mode_rule: QdeimModeRule,
}

impl ExperimentConfig {
    fn validate(&self) -> Result<(), ExperimentError> {
        let reject = |reason: String| Err(ExperimentError::Config { reason });
        if self.methods.is_empty() {
            return reject("methods must not be empty".into());
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return reject(format!("method '{m}' listed twice"));
            }
        }
        if self.mode_range.is_empty() {
            return reject("mode_range must not be empty".into());
        }
        if self.sensor_range.is_empty() {
            return reject("sensor_range must not be empty".into());
        }
        if self.seeds.is_empty() {
            return reject("seeds must not be empty".into());
        }
        if let Some(&n) = self.mode_range.iter().find(|&&n| n == 0) {
            return reject(format!("mode counts must be positive, got {n}"));
        }
        if let Some(&k) = self.sensor_range.iter().find(|&&k| k == 0) {
            return reject(format!("sensor counts must be positive, got {k}"));
        }
        Ok(())
    }

    /// The largest mode count any cell will request.
    fn max_modes_needed(&self) -> usize {
        let mut max_n = 0;
        let non_qdeim = self.methods.iter().any(|m| *m != Method::Qdeim);
        let qdeim = self.methods.contains(&Method::Qdeim);
        if non_qdeim || (qdeim && self.qdeim_mode_rule == QdeimModeRule::SweepModes) {
            max_n = max_n.max(*self.mode_range.iter().max().expect("validated non-empty"));
        }
        if qdeim && self.qdeim_mode_rule == QdeimModeRule::TrackSensors {
            max_n = max_n.max(*self.sensor_range.iter().max().expect("validated non-empty"));
        }
        max_n
    }
}

/// One evaluated sweep cell.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub method: Method,
    /// Modes retained for this cell (equal to `n_sensors` for Q-DEIM under
    /// [`QdeimModeRule::TrackSensors`]).
    pub n_modes: usize,
    pub n_sensors: usize,
    pub sigma: f64,
    pub seed: u64,
    /// Mean over test samples of ‖û − u‖/‖u‖ vs noiseless truth.
    pub mean_rel_error: f64,
    /// Sample standard deviation of the same (0 for a single test sample).
    pub std_rel_error: f64,
    /// Analytic risk decomposition for this cell's measurement map; absent
    /// when σ = 0 (the decomposition needs a noise level).
    pub risk: Option<RiskReport>,
    /// Dice overlap with the greedy D-optimal selection at the same (n, k);
    /// reported for the pivoted-QR MAP method only.
    pub dice_vs_greedy: Option<f64>,
}

/// Per-seed shared state: one basis at the largest requested mode count,
/// plus clean and noise-corrupted test snapshots.
struct SeedContext {
    seed: u64,
    basis: ModalBasis,
    test_clean: SnapshotMatrix,
    test_noisy: SnapshotMatrix,
}

fn build_context(config: &ExperimentConfig, seed: u64, max_n: usize) -> Result<SeedContext, ExperimentError> {
    let (train, test) = config.dataset.load(Some(seed))?;
    let centered = center(&train)?;
    let basis = pod_basis(&centered, max_n)?;
    let test_noisy = add_noise(&test, &config.noise, seed);
    Ok(SeedContext {
        seed,
        basis,
        test_clean: test,
        test_noisy,
    })
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

fn run_cell(
    ctx: &SeedContext,
    method: Method,
    n: usize,
    k: usize,
    noise: &NoiseModel,
    budget: u64,
) -> Result<SweepRow, ExperimentError> {
    let basis = ctx.basis.truncate(n)?;
    let prior = prior_from_pod(&basis)?;
    let placed = match method {
        Method::Qdeim => place_cpqr(&basis, k)?,
        Method::Qmap => place_qmap(&basis, &prior, noise, k)?,
        Method::GreedyDMap => place_greedy_d(&basis, &prior, noise, k, true)?,
        Method::DMap => place_brute_d(&basis, &prior, noise, k, budget)?,
    };
    let sel = placed.selection;

    let posterior = match method {
        Method::Qdeim => None,
        _ => Some(build_posterior(&basis, &sel, &prior, noise)?),
    };
    let n_test = ctx.test_clean.n_samples();
    let mut errors = Vec::with_capacity(n_test);
    for j in 0..n_test {
        let y = sel.gather_vec(&ctx.test_noisy.data.column(j).into_owned())?;
        let estimate = match &posterior {
            None => deim_estimate(&basis, &sel, &y)?,
            Some(post) => map_estimate(post, &basis, &y)?,
        };
        let truth: DVector<f64> = ctx.test_clean.data.column(j).into_owned();
        errors.push(relative_error(&estimate, &truth)?);
    }
    let (mean_rel_error, std_rel_error) = mean_std(&errors);

    let risk = if noise.sigma > 0.0 {
        let a = sel.gather_rows(&basis.phi)?;
        Some(risk_report(&a, &prior, noise)?)
    } else {
        None
    };
    let dice_vs_greedy = if method == Method::Qmap {
        let greedy = place_greedy_d(&basis, &prior, noise, k, true)?;
        Some(dice(&sel, &greedy.selection)?)
    } else {
        None
    };

    Ok(SweepRow {
        method,
        n_modes: n,
        n_sensors: k,
        sigma: noise.sigma,
        seed: ctx.seed,
        mean_rel_error,
        std_rel_error,
        risk,
        dice_vs_greedy,
    })
}

/// Runs the full (method × modes × sensors × seed) error sweep.
///
/// Budget and shape validation happen before any data generation or
/// factorization. Rows come back sorted by (method, n, k, seed) and the
/// whole sweep is deterministic for a given configuration, independent of
/// thread count.
pub fn run_error_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRow>, ExperimentError> {
    config.validate()?;
    if config.methods.contains(&Method::DMap) {
        let n_loc = config.dataset.n_locations()?;
        for &k in &config.sensor_range {
            let required = subset_count(n_loc, k);
            if required > config.brute_budget as u128 {
                return Err(ExperimentError::Config {
                    reason: format!(
                        "exhaustive search over {required} subsets (N = {n_loc}, k = {k}) \
                         exceeds the budget of {}",
                        config.brute_budget
                    ),
                });
            }
        }
    }

    let max_n = config.max_modes_needed();
    let contexts = config
        .seeds
        .iter()
        .map(|&seed| build_context(config, seed, max_n))
        .collect::<Result<Vec<_>, _>>()?;

    let mut cells: Vec<(usize, Method, usize, usize)> = Vec::new();
    for (ci, _) in contexts.iter().enumerate() {
        for &method in &config.methods {
            if method == Method::Qdeim && config.qdeim_mode_rule == QdeimModeRule::TrackSensors {
                for &k in &config.sensor_range {
                    cells.push((ci, method, k, k));
                }
            } else {
                for &n in &config.mode_range {
                    for &k in &config.sensor_range {
                        cells.push((ci, method, n, k));
                    }
                }
            }
        }
    }

    let mut rows = cells
        .par_iter()
        .map(|&(ci, method, n, k)| {
            run_cell(&contexts[ci], method, n, k, &config.noise, config.brute_budget)
        })
        .collect::<Result<Vec<_>, _>>()?;
    rows.sort_by(|a, b| {
        (a.method, a.n_modes, a.n_sensors, a.seed).cmp(&(b.method, b.n_modes, b.n_sensors, b.seed))
    });
    Ok(rows)
}

/// Column layout of [`error_sweep_table`].
pub const ERROR_SWEEP_COLUMNS: [&str; 16] = [
    "method",
    "n",
    "k",
    "sigma",
    "seed",
    "mean_rel_error",
    "std_rel_error",
    "risk_ls",
    "risk_map",
    "delta_prior",
    "delta_noise",
    "zeta_prior",
    "zeta_noise",
    "premium",
    "nullity",
    "dice_vs_greedy",
];

/// Renders sweep rows as a table (risk columns empty where σ = 0).
pub fn error_sweep_table(rows: &[SweepRow]) -> Table {
    let mut t = Table::new(ERROR_SWEEP_COLUMNS.to_vec());
    for row in rows {
        let mut cells = vec![
            Cell::Text(row.method.name().to_string()),
            Cell::Int(row.n_modes as i64),
            Cell::Int(row.n_sensors as i64),
            Cell::Num(row.sigma),
            Cell::Int(row.seed as i64),
            Cell::Num(row.mean_rel_error),
            Cell::Num(row.std_rel_error),
        ];
        match &row.risk {
            Some(r) => cells.extend([
                Cell::Num(r.risk_ls),
                Cell::Num(r.risk_map),
                Cell::Num(r.delta_prior),
                Cell::Num(r.delta_noise),
                Cell::Num(r.zeta_prior),
                Cell::Num(r.zeta_noise),
                Cell::Num(r.premium),
                Cell::Int(r.nullity_a as i64),
            ]),
            None => cells.extend(std::iter::repeat_n(Cell::Missing, 8)),
        }
        cells.push(match row.dice_vs_greedy {
            Some(d) => Cell::Num(d),
            None => Cell::Missing,
        });
        t.push_row(cells).expect("fixed layout");
    }
    t
}

/// Draws a uniformly random k-subset of {0, …, n_locations−1} on the
/// selection substream of `seed` (partial Fisher–Yates, so the same seed
/// always yields the same subset regardless of k′ ≤ k prefixes).
pub fn random_selection(
    n_locations: usize,
    k: usize,
    seed: u64,
) -> Result<SensorSelection, ExperimentError> {
    if k > n_locations {
        return Err(ExperimentError::Config {
            reason: format!("cannot draw {k} distinct sensors from {n_locations} locations"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_SELECTION_OFFSET);
    let mut pool: Vec<usize> = (0..n_locations).collect();
    for i in 0..k {
        let j = rng.random_range(i..n_locations);
        pool.swap(i, j);
    }
    let indices = pool[..k].to_vec();
    Ok(SensorSelection::new(indices, n_locations)?)
}

/// Column layout of [`run_risk_sweep`].
pub const RISK_SWEEP_COLUMNS: [&str; 15] = [
    "n",
    "k",
    "sigma",
    "seed",
    "sensors",
    "risk_ls",
    "risk_map",
    "delta_prior",
    "delta_noise",
    "zeta_prior",
    "zeta_noise",
    "premium",
    "nullity",
    "sigma_min_a",
    "null_prior_mass",
];

/// Risk decomposition of one *fixed random* k-sensor selection as the mode
/// count sweeps: the regime change at n = k (the measurement map turning
/// rank-deficient) shows up in the δ/ζ columns. Also reports the smallest
/// singular value of the measurement map and the prior mass in its null
/// space as diagnostics.
pub fn run_risk_sweep(
    dataset: &DataSource,
    k: usize,
    mode_range: &[usize],
    seed: u64,
    noise: &NoiseModel,
) -> Result<Table, ExperimentError> {
    if mode_range.is_empty() {
        return Err(ExperimentError::Config {
            reason: "mode_range must not be empty".into(),
        });
    }
    if k == 0 {
        return Err(ExperimentError::Config {
            reason: "k must be positive".into(),
        });
    }
    if mode_range.contains(&0) {
        return Err(ExperimentError::Config {
            reason: "mode counts must be positive".into(),
        });
    }
    let (train, _test) = dataset.load(Some(seed))?;
    let centered = center(&train)?;
    let max_n = *mode_range.iter().max().expect("non-empty");
    let basis_full = pod_basis(&centered, max_n)?;
    let sel = random_selection(basis_full.n_dims(), k, seed)?;
    let mut sensors_sorted = sel.indices().to_vec();
    sensors_sorted.sort_unstable();
    let sensors_text = sensors_sorted
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(" ");

    let mut t = Table::new(RISK_SWEEP_COLUMNS.to_vec());
    for &n in mode_range {
        let basis = basis_full.truncate(n)?;
        let prior = prior_from_pod(&basis)?;
        let a = sel.gather_rows(&basis.phi)?;
        let report = risk_report(&a, &prior, noise)?;
        let svd = econ_svd(&a)?;
        let sigma_min = svd.s[svd.s.len() - 1];
        let null_mass = null_space_prior_mass(&basis, &sel, &prior)?;
        t.push_row(vec![
            Cell::Int(n as i64),
            Cell::Int(k as i64),
            Cell::Num(noise.sigma),
            Cell::Int(seed as i64),
            Cell::Text(sensors_text.clone()),
            Cell::Num(report.risk_ls),
            Cell::Num(report.risk_map),
            Cell::Num(report.delta_prior),
            Cell::Num(report.delta_noise),
            Cell::Num(report.zeta_prior),
            Cell::Num(report.zeta_noise),
            Cell::Num(report.premium),
            Cell::Int(report.nullity_a as i64),
            Cell::Num(sigma_min),
            Cell::Num(null_mass),
        ])
        .expect("fixed layout");
    }
    Ok(t)
}

/// Column layout of [`run_dice_grid`].
pub const DICE_GRID_COLUMNS: [&str; 4] = ["n", "k", "sigma", "dice"];

/// Dice overlap between the pivoted-QR MAP selection and the greedy
/// D-optimal selection over a (modes × noise) grid, at a fixed sensor
/// count. Cells with n < k are reported with an empty dice value: past the
/// mode count the D-objective cannot distinguish completions, so the
/// overlap there is not meaningful.
pub fn run_dice_grid(
    dataset: &DataSource,
    k: usize,
    mode_range: &[usize],
    sigma_range: &[f64],
) -> Result<Table, ExperimentError> {
    if mode_range.is_empty() || sigma_range.is_empty() {
        return Err(ExperimentError::Config {
            reason: "mode_range and sigma_range must not be empty".into(),
        });
    }
    if k == 0 {
        return Err(ExperimentError::Config {
            reason: "k must be positive".into(),
        });
    }
    if mode_range.contains(&0) {
        return Err(ExperimentError::Config {
            reason: "mode counts must be positive".into(),
        });
    }
    let (train, _test) = dataset.load(None)?;
    let centered = center(&train)?;
    let max_n = *mode_range.iter().max().expect("non-empty");
    let basis_full = pod_basis(&centered, max_n)?;

    let mut t = Table::new(DICE_GRID_COLUMNS.to_vec());
    for &n in mode_range {
        for &sigma in sigma_range {
            let dice_cell = if n < k {
                Cell::Missing
            } else {
                let noise = NoiseModel::new(sigma)?;
                let basis = basis_full.truncate(n)?;
                let prior = prior_from_pod(&basis)?;
                let qmap = place_qmap(&basis, &prior, &noise, k)?;
                let greedy = place_greedy_d(&basis, &prior, &noise, k, true)?;
                Cell::Num(dice(&qmap.selection, &greedy.selection)?)
            };
            t.push_row(vec![
                Cell::Int(n as i64),
                Cell::Int(k as i64),
                Cell::Num(sigma),
                dice_cell,
            ])
            .expect("fixed layout");
        }
    }
    Ok(t)
}
