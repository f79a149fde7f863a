//! Modal basis extraction and data-derived prior covariances.
//!
//! Training snapshots are centered, factored by an economy SVD, and the
//! leading left singular vectors become the orthonormal basis Φ (N×n). The
//! matching prior covariance over modal coefficients is the sample
//! covariance of the data expressed in that basis, which is exactly
//! diag(σ_i²/(p−1)) for the SVD's singular values σ_i and p snapshots.
//!
//! Sign convention: each basis column is flipped, if needed, so its
//! largest-magnitude entry (first occurrence on ties) is positive; outputs
//! are therefore deterministic across runs and platforms.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::datasets::SnapshotMatrix;
use crate::numerics::{
    cholesky_solve, cholesky_spd, econ_svd, logdet_spd, rank_tolerance, sym_eig, validate_finite,
    NumericsError, SYMMETRY_TOL_REL,
};

/// Relative floor (times the largest eigenvalue) below which a prior
/// eigenvalue counts as zero when validating positive semidefiniteness or
/// clamping in the matrix square root.
pub const PRIOR_PSD_TOL_REL: f64 = 1e-12;

/// Errors from basis construction and prior handling.
#[derive(Debug, Error)]
pub enum PodError {
    #[error("centering needs at least 2 snapshots, got {got}")]
    TooFewSamples { got: usize },
    #[error("requested {requested} modes but the data has numerical rank {rank}")]
    RankExceeded { requested: usize, rank: usize },
    #[error(
        "prior covariance is singular ({detail}); reduce the mode count so every \
         retained mode carries positive variance"
    )]
    SingularPrior { detail: String },
    #[error("prior covariance is not positive semidefinite (eigenvalue {min_eigenvalue:.3e})")]
    IndefinitePrior { min_eigenvalue: f64 },
    #[error("diagonal prior entry {index} is invalid: {value}")]
    InvalidDiagonal { index: usize, value: f64 },
    #[error("scaled-identity prior needs a positive finite scale, got {scale}")]
    InvalidScale { scale: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Orthonormal modal basis plus the spectrum it was cut from.
#[derive(Debug, Clone)]
pub struct ModalBasis {
    /// N×n matrix with orthonormal columns.
    pub phi: DMatrix<f64>,
    /// All retained singular values of the (centered) data, non-increasing;
    /// the basis holds the first `n_modes()` of them.
    pub singular_values: DVector<f64>,
    /// Number of snapshots the basis was built from.
    pub n_samples_used: usize,
    /// Column mean of the training data, added back by full-state
    /// reconstructions (zeros when the data was used uncentered).
    pub mean: DVector<f64>,
}

impl ModalBasis {
    /// Number of modes (columns of Φ).
    pub fn n_modes(&self) -> usize {
        self.phi.ncols()
    }

    /// State dimension (rows of Φ).
    pub fn n_dims(&self) -> usize {
        self.phi.nrows()
    }

    /// New basis keeping only the first `n` modes; the spectrum, sample
    /// count, and mean are carried over unchanged.
    pub fn truncate(&self, n: usize) -> Result<ModalBasis, PodError> {
        if n == 0 || n > self.n_modes() {
            return Err(PodError::RankExceeded {
                requested: n,
                rank: self.n_modes(),
            });
        }
        Ok(ModalBasis {
            phi: self.phi.columns(0, n).into_owned(),
            singular_values: self.singular_values.clone(),
            n_samples_used: self.n_samples_used,
            mean: self.mean.clone(),
        })
    }
}

/// Subtracts the column mean from every snapshot and records it on the
/// result so reconstructions can add it back.
pub fn center(x: &SnapshotMatrix) -> Result<SnapshotMatrix, PodError> {
    let p = x.n_samples();
    if p < 2 {
        return Err(PodError::TooFewSamples { got: p });
    }
    let mean = x.data.column_mean();
    let mut data = x.data.clone();
    for mut col in data.column_iter_mut() {
        col -= &mean;
    }
    Ok(SnapshotMatrix {
        data,
        mean: Some(mean),
    })
}

fn fix_column_signs(phi: &mut DMatrix<f64>) {
    for mut col in phi.column_iter_mut() {
        let mut best = 0usize;
        let mut best_abs = f64::NEG_INFINITY;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Leading `n` left singular vectors of the snapshot data, with the full
/// singular-value list attached.
///
/// The input is normally the output of [`center`]; uncentered data is
/// accepted and treated as having zero mean (the basis then reconstructs
/// absolute states directly).
pub fn pod_basis(xc: &SnapshotMatrix, n: usize) -> Result<ModalBasis, PodError> {
    let svd = econ_svd(&xc.data)?;
    let tol = rank_tolerance(xc.n_dims(), xc.n_samples(), svd.s[0]);
    let rank = svd.s.iter().take_while(|&&v| v > tol).count();
    if n == 0 || n > rank {
        return Err(PodError::RankExceeded { requested: n, rank });
    }
    let mut phi = svd.u.columns(0, n).into_owned();
    fix_column_signs(&mut phi);
    let mean = xc
        .mean
        .clone()
        .unwrap_or_else(|| DVector::zeros(xc.n_dims()));
    Ok(ModalBasis {
        phi,
        singular_values: svd.s,
        n_samples_used: xc.n_samples(),
        mean,
    })
}

/// Symmetric positive semidefinite covariance over modal coefficients, with
/// a fast path for the diagonal case.
#[derive(Debug, Clone)]
pub struct PriorCovariance {
    gamma: DMatrix<f64>,
    diagonal: bool,
}

impl PriorCovariance {
    /// Wraps a dense covariance after validating symmetry (to the shared
    /// relative tolerance) and positive semidefiniteness (eigenvalues above
    /// `-PRIOR_PSD_TOL_REL` times the largest); the stored matrix is the
    /// symmetrized input.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self, PodError> {
        validate_finite(m)?;
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(NumericsError::ShapeMismatch {
                context: format!("covariance must be square and nonempty, got {}x{}", m.nrows(), m.ncols()),
            }
            .into());
        }
        let eig = sym_eig(m)?; // also enforces symmetry to SYMMETRY_TOL_REL
        let lambda_max = eig.0[0].max(0.0);
        let lambda_min = eig.0[eig.0.len() - 1];
        if lambda_min < -PRIOR_PSD_TOL_REL * lambda_max.max(1.0) {
            return Err(PodError::IndefinitePrior {
                min_eigenvalue: lambda_min,
            });
        }
        let sym = (m + m.transpose()) * 0.5;
        let diagonal = is_numerically_diagonal(&sym);
        Ok(Self { gamma: sym, diagonal })
    }

    /// Diagonal covariance from nonnegative variances.
    pub fn from_diagonal(d: &DVector<f64>) -> Result<Self, PodError> {
        if d.is_empty() {
            return Err(NumericsError::Empty {
                context: "diagonal prior",
            }
            .into());
        }
        for (i, &v) in d.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(PodError::InvalidDiagonal { index: i, value: v });
            }
        }
        Ok(Self {
            gamma: DMatrix::from_diagonal(d),
            diagonal: true,
        })
    }

    /// The covariance matrix itself.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    /// Whether the fast diagonal paths apply.
    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    /// Dimension n of the n×n covariance.
    pub fn dim(&self) -> usize {
        self.gamma.nrows()
    }

    /// Sum of the variances.
    pub fn trace(&self) -> f64 {
        self.gamma.trace()
    }

    /// Exact inverse: reciprocal diagonal in the diagonal case, a Cholesky
    /// solve against the identity otherwise. A singular prior is a hard
    /// error — downstream posterior formulas need the true inverse, and
    /// silently regularizing would corrupt the risk identities.
    pub fn inverse(&self) -> Result<DMatrix<f64>, PodError> {
        if self.diagonal {
            let mut inv = DMatrix::zeros(self.dim(), self.dim());
            for i in 0..self.dim() {
                let d = self.gamma[(i, i)];
                if d <= 0.0 {
                    return Err(PodError::SingularPrior {
                        detail: format!("variance {i} is {d}"),
                    });
                }
                inv[(i, i)] = 1.0 / d;
            }
            return Ok(inv);
        }
        let l = cholesky_spd(&self.gamma).map_err(|e| PodError::SingularPrior {
            detail: e.to_string(),
        })?;
        let inv = cholesky_solve(&l, &DMatrix::identity(self.dim(), self.dim()))?;
        Ok((&inv + inv.transpose()) * 0.5)
    }

    /// Symmetric matrix square root Γ^{1/2}; eigenvalues inside the PSD
    /// validation band are clamped at zero.
    pub fn sqrt_matrix(&self) -> Result<DMatrix<f64>, PodError> {
        if self.diagonal {
            let mut root = DMatrix::zeros(self.dim(), self.dim());
            for i in 0..self.dim() {
                root[(i, i)] = self.gamma[(i, i)].sqrt();
            }
            return Ok(root);
        }
        let (values, vectors) = sym_eig(&self.gamma)?;
        let mut scaled = vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= values[j].max(0.0).sqrt();
        }
        Ok(&scaled * vectors.transpose())
    }

    /// log det Γ; errors if the prior is singular.
    pub fn logdet(&self) -> Result<f64, PodError> {
        if self.diagonal {
            let mut acc = 0.0;
            for i in 0..self.dim() {
                let d = self.gamma[(i, i)];
                if d <= 0.0 {
                    return Err(PodError::SingularPrior {
                        detail: format!("variance {i} is {d}"),
                    });
                }
                acc += d.ln();
            }
            return Ok(acc);
        }
        logdet_spd(&self.gamma).map_err(|e| PodError::SingularPrior {
            detail: e.to_string(),
        })
    }
}

fn is_numerically_diagonal(m: &DMatrix<f64>) -> bool {
    let scale = m.amax();
    let tol = SYMMETRY_TOL_REL * scale.max(f64::MIN_POSITIVE);
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if r != c && m[(r, c)].abs() > tol {
                return false;
            }
        }
    }
    true
}

/// Data-derived diagonal prior diag(σ_i²/(p−1)) over the basis's modes.
pub fn prior_from_pod(basis: &ModalBasis) -> Result<PriorCovariance, PodError> {
    if basis.n_samples_used < 2 {
        return Err(PodError::TooFewSamples {
            got: basis.n_samples_used,
        });
    }
    let denom = (basis.n_samples_used - 1) as f64;
    let d = DVector::from_fn(basis.n_modes(), |i, _| {
        let s = basis.singular_values[i];
        s * s / denom
    });
    PriorCovariance::from_diagonal(&d)
}

/// Alternative prior constructions for comparison experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorPreset {
    /// diag(σ_i²/(p−1)) — the sample variance of each modal coefficient.
    PodVariance,
    /// diag(σ_i) — raw singular values as variances.
    SingularValues,
    /// c·I with the given scale.
    ScaledIdentity(f64),
}

/// Builds the prior covariance a preset names for the given basis.
pub fn prior_preset(basis: &ModalBasis, preset: PriorPreset) -> Result<PriorCovariance, PodError> {
    match preset {
        PriorPreset::PodVariance => prior_from_pod(basis),
        PriorPreset::SingularValues => {
            let d = DVector::from_fn(basis.n_modes(), |i, _| basis.singular_values[i]);
            PriorCovariance::from_diagonal(&d)
        }
        PriorPreset::ScaledIdentity(scale) => {
            if !scale.is_finite() || scale <= 0.0 {
                return Err(PodError::InvalidScale { scale });
            }
            PriorCovariance::from_diagonal(&DVector::from_element(basis.n_modes(), scale))
        }
    }
}
