//! Benchmark data generation, measurement noise, file ingestion, and
//! train/test splitting.
//!
//! All randomness flows through one seeded, portable generator (ChaCha8) with
//! a documented substream map, so every operation is a pure function of its
//! inputs and a 64-bit seed, reproducible across platforms and across
//! serial/parallel execution:
//!
//! | substream (ChaCha8 `set_stream`)        | used by                         |
//! |-----------------------------------------|---------------------------------|
//! | `i` (0 ≤ i < 2³²)                       | harmonic sample i               |
//! | [`STREAM_NOISE_OFFSET`] + column        | measurement noise per column    |
//! | [`STREAM_SELECTION_OFFSET`]             | random sensor-subset draws      |
//! | [`STREAM_MC_OFFSET`] + pair             | Monte Carlo risk draws          |
//!
//! The offsets keep the substream spaces disjoint, so one experiment seed can
//! drive generation, noise, and selection without any generator reuse.

mod harmonic;
pub mod io;

pub use harmonic::{
    generate_harmonic, harmonic_draws, harmonic_from_terms, AmplitudeParam, HarmonicConfig,
};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::numerics::{validate_finite, NumericsError};

/// First substream reserved for per-column measurement noise.
pub const STREAM_NOISE_OFFSET: u64 = 1 << 32;
/// Substream reserved for random sensor-subset selection.
pub const STREAM_SELECTION_OFFSET: u64 = 1 << 33;
/// First substream reserved for Monte Carlo risk draws (one per antithetic
/// pair).
pub const STREAM_MC_OFFSET: u64 = 1 << 34;

/// Guard subtracted before the ceiling in [`split`] so that a train count
/// that is mathematically an integer is not pushed up by floating-point
/// rounding of `p · fraction`.
pub const SPLIT_ROUNDING_GUARD: f64 = 1e-9;

/// Errors raised by dataset generation, splitting, and I/O.
#[derive(Debug, Error)]
pub enum DatasetError {
    /// A configuration field is out of its documented domain.
    #[error("invalid configuration: {reason}")]
    InvalidConfig {
        /// What was wrong.
        reason: String,
    },
    /// A split would leave one side without any columns.
    #[error("degenerate split: {n_train} train / {n_test} test columns (both sides must be nonempty)")]
    DegenerateSplit {
        /// Columns that would land in the training side.
        n_train: usize,
        /// Columns that would land in the test side.
        n_test: usize,
    },
    /// Two snapshot matrices that must be conformal are not.
    #[error("shape mismatch: {context}")]
    ShapeMismatch {
        /// Human-readable description of the mismatch.
        context: String,
    },
    /// A file could not be read or written.
    #[error("I/O error on {path}: {source}")]
    Io {
        /// The offending path.
        path: String,
        /// The underlying error.
        #[source]
        source: std::io::Error,
    },
    /// A file exists but its contents violate the format.
    #[error("malformed file {path}: {reason}")]
    Format {
        /// The offending path.
        path: String,
        /// What was wrong, including the row/column location when known.
        reason: String,
    },
    /// Propagated numerical-kernel error (e.g. non-finite entries).
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// N×p matrix of state snapshots, columns are samples. `mean` is present
/// exactly when the matrix has been centered, in which case the columns of
/// `data` sum to (numerically) zero and `mean` holds the subtracted column
/// mean for later reconstruction offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    /// The data, column-major, one sample per column.
    pub data: DMatrix<f64>,
    /// Column mean subtracted during centering, if any.
    pub mean: Option<DVector<f64>>,
}

impl SnapshotMatrix {
    /// Wraps a raw matrix after validating finiteness. The result is
    /// uncentered (`mean` is `None`).
    pub fn new(data: DMatrix<f64>) -> Result<Self, DatasetError> {
        validate_finite(&data)?;
        Ok(Self { data, mean: None })
    }

    /// State dimension N (rows).
    pub fn n_dims(&self) -> usize {
        self.data.nrows()
    }

    /// Sample count p (columns).
    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }
}

/// Isotropic iid measurement-noise model: covariance σ²·I.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Noise standard deviation σ ≥ 0.
    pub sigma: f64,
}

impl NoiseModel {
    /// Validates σ (finite, nonnegative).
    pub fn new(sigma: f64) -> Result<Self, DatasetError> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(DatasetError::InvalidConfig {
                reason: format!("noise sigma must be finite and nonnegative, got {sigma}"),
            });
        }
        Ok(Self { sigma })
    }

    /// Noise variance σ².
    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }
}

/// Perturbs every entry by independent N(0, σ²) noise; σ = 0 returns the
/// input unchanged.
///
/// Column c draws from substream [`STREAM_NOISE_OFFSET`] + c of `seed`, row
/// by row, so outputs are identical whether columns are processed serially
/// or concurrently, and never reuse the substreams of sample generation.
/// The output is treated as fresh, uncentered data (`mean` is `None`) unless
/// σ = 0.
pub fn add_noise(x: &SnapshotMatrix, noise: &NoiseModel, seed: u64) -> SnapshotMatrix {
    if noise.sigma == 0.0 {
        return x.clone();
    }
    let mut data = x.data.clone_owned();
    for c in 0..data.ncols() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(STREAM_NOISE_OFFSET + c as u64);
        for r in 0..data.nrows() {
            let z: f64 = rng.sample(StandardNormal);
            data[(r, c)] += noise.sigma * z;
        }
    }
    SnapshotMatrix { data, mean: None }
}

/// Mean over samples of the per-column relative perturbation
/// ‖noisy − clean‖₂ / ‖clean‖₂ — the "how much of a sample is noise"
/// statistic. Monotone in the noise level.
pub fn noise_ratio(clean: &SnapshotMatrix, noisy: &SnapshotMatrix) -> Result<f64, DatasetError> {
    if clean.data.shape() != noisy.data.shape() {
        return Err(DatasetError::ShapeMismatch {
            context: format!(
                "noise_ratio: clean is {}x{}, noisy is {}x{}",
                clean.n_dims(),
                clean.n_samples(),
                noisy.n_dims(),
                noisy.n_samples()
            ),
        });
    }
    let p = clean.n_samples();
    if p == 0 {
        return Err(DatasetError::InvalidConfig {
            reason: "noise_ratio needs at least one sample".into(),
        });
    }
    let mut total = 0.0;
    for c in 0..p {
        let clean_col = clean.data.column(c);
        let denom = clean_col.norm();
        if denom == 0.0 {
            return Err(DatasetError::InvalidConfig {
                reason: format!("noise_ratio: clean sample {c} has zero norm"),
            });
        }
        total += (noisy.data.column(c) - clean_col).norm() / denom;
    }
    Ok(total / p as f64)
}

/// Order-preserving prefix split: the first ⌈p·fraction⌉ columns are the
/// training set, the rest the test set. No shuffling — sample order is
/// meaningful and the split must be reproducible.
///
/// The ceiling is evaluated with a [`SPLIT_ROUNDING_GUARD`] so a product
/// that is an integer up to floating-point rounding stays that integer.
/// Both outputs are uncentered (`mean` is `None`).
pub fn split(
    x: &SnapshotMatrix,
    train_fraction: f64,
) -> Result<(SnapshotMatrix, SnapshotMatrix), DatasetError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DatasetError::InvalidConfig {
            reason: format!("train_fraction must lie strictly between 0 and 1, got {train_fraction}"),
        });
    }
    let p = x.n_samples();
    let n_train =
        ((p as f64 * train_fraction - SPLIT_ROUNDING_GUARD).ceil() as usize).min(p);
    let n_test = p - n_train;
    if n_train == 0 || n_test == 0 {
        return Err(DatasetError::DegenerateSplit { n_train, n_test });
    }
    let train = SnapshotMatrix {
        data: x.data.columns(0, n_train).clone_owned(),
        mean: None,
    };
    let test = SnapshotMatrix {
        data: x.data.columns(n_train, n_test).clone_owned(),
        mean: None,
    };
    Ok((train, test))
}
