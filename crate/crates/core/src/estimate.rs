//! Point estimators for modal coefficients from sparse measurements.
//!
//! Given the measurement map A = SᵀΦ and measurements y, the interpolation
//! estimator solves the least-squares problem with the minimum-norm rule,
//! m_LS = A⁺y, while the Bayesian estimator with Gaussian prior N(0, Γ_prior)
//! and iid noise N(0, σ²I) returns the posterior mean
//! m_MAP = Γ_post Aᵀ y/σ², Γ_post = (Γ_prior⁻¹ + σ⁻²AᵀA)⁻¹.
//! The posterior precision is factorized and solved, never inverted
//! directly.
//!
//! Mean handling: estimators operate on centered measurements y − Sᵀū and
//! full states are reconstructed as ū + Φm̂, so absolute measurements can be
//! fed directly whenever the basis carries its training mean.
//!
//! A-priori relative-error bounds: with ratio = ‖η‖/‖u‖,
//! the Bayesian estimate obeys ‖û−u‖/‖u‖ ≤ ‖D−I‖₂ + ‖Γ_postAᵀ/σ²‖₂·ratio
//! for D = ΦΓ_postAᵀSᵀ/σ², and the interpolation estimate obeys
//! ‖û−u‖/‖u‖ ≤ (1/σ_min⁺(A))·(1 + ratio) with σ_min⁺ the smallest nonzero
//! singular value. Both are upper bounds; tightness is not promised.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::datasets::NoiseModel;
use crate::numerics::{
    cholesky_solve, cholesky_spd, econ_svd, min_norm_solve, rank_tolerance, spectral_norm,
    validate_finite_vec, NumericsError,
};
use crate::placement::{PlacementError, SensorSelection};
use crate::pod::{ModalBasis, PodError, PriorCovariance};

/// Errors from estimator construction and application.
#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("Bayesian estimation needs sigma > 0, got {sigma} (noiseless limit unsupported)")]
    ZeroNoise { sigma: f64 },
    #[error("relative error is undefined against a zero truth vector")]
    ZeroTruth,
    #[error("measurement map SᵀΦ is entirely zero; its pseudoinverse norm is undefined")]
    DegenerateMeasurementMap,
    #[error(transparent)]
    Pod(#[from] PodError),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Gaussian posterior over modal coefficients for one (Φ, S, Γ_prior, σ).
#[derive(Debug, Clone)]
pub struct Posterior {
    /// n×n posterior covariance (Γ_prior⁻¹ + σ⁻²AᵀA)⁻¹, symmetrized.
    pub gamma_post: DMatrix<f64>,
    /// n×k operator Γ_post Aᵀ/σ² sending centered measurements to the
    /// posterior-mean coefficients.
    pub map_operator: DMatrix<f64>,
    /// k×n measurement map A.
    pub a_matrix: DMatrix<f64>,
    /// Sᵀū, subtracted from measurements before applying the operator
    /// (zeros when the posterior was built from a raw A matrix).
    pub y_offset: DVector<f64>,
}

/// Which estimator produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMethod {
    Deim,
    Map,
}

impl std::fmt::Display for EstimateMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Deim => "deim",
            Self::Map => "map",
        })
    }
}

/// A coefficient estimate and its lift to the full grid.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub coefficients: DVector<f64>,
    /// ū + Φ·coefficients.
    pub full_state: DVector<f64>,
    pub method: EstimateMethod,
}

fn check_measurement_len(len: usize, k: usize) -> Result<(), EstimateError> {
    if len != k {
        return Err(NumericsError::ShapeMismatch {
            context: format!("got {len} measurements for {k} sensors"),
        }
        .into());
    }
    Ok(())
}

/// Minimum-norm least-squares estimate m_LS = (SᵀΦ)⁺(y − Sᵀū), lifted to
/// ū + Φm_LS.
pub fn deim_estimate(
    basis: &ModalBasis,
    sel: &SensorSelection,
    y: &DVector<f64>,
) -> Result<Estimate, EstimateError> {
    validate_finite_vec(y)?;
    check_measurement_len(y.len(), sel.len())?;
    let a = sel.gather_rows(&basis.phi)?;
    let yc = y - sel.gather_vec(&basis.mean)?;
    let coefficients = min_norm_solve(&a, &yc)?;
    let full_state = &basis.mean + &basis.phi * &coefficients;
    Ok(Estimate {
        coefficients,
        full_state,
        method: EstimateMethod::Deim,
    })
}

fn assemble_posterior(
    a: DMatrix<f64>,
    prior: &PriorCovariance,
    noise: &NoiseModel,
    y_offset: DVector<f64>,
) -> Result<Posterior, EstimateError> {
    if noise.sigma <= 0.0 {
        return Err(EstimateError::ZeroNoise { sigma: noise.sigma });
    }
    let n = prior.dim();
    if a.ncols() != n {
        return Err(NumericsError::ShapeMismatch {
            context: format!(
                "measurement map has {} columns but the prior covers {n} modes",
                a.ncols()
            ),
        }
        .into());
    }
    let sigma2 = noise.variance();
    let precision = prior.inverse()? + a.transpose() * &a / sigma2;
    let precision = (&precision + precision.transpose()) * 0.5;
    let l = cholesky_spd(&precision)?;
    let gamma_post = cholesky_solve(&l, &DMatrix::identity(n, n))?;
    let gamma_post = (&gamma_post + gamma_post.transpose()) * 0.5;
    let map_operator = cholesky_solve(&l, &a.transpose())? / sigma2;
    Ok(Posterior {
        gamma_post,
        map_operator,
        a_matrix: a,
        y_offset,
    })
}

/// Posterior for the sensor-induced map A = SᵀΦ; the training mean's sensor
/// values are recorded so measurements are centered consistently.
pub fn build_posterior(
    basis: &ModalBasis,
    sel: &SensorSelection,
    prior: &PriorCovariance,
    noise: &NoiseModel,
) -> Result<Posterior, EstimateError> {
    let a = sel.gather_rows(&basis.phi)?;
    let y_offset = sel.gather_vec(&basis.mean)?;
    assemble_posterior(a, prior, noise, y_offset)
}

/// Posterior for an arbitrary dense measurement map A (no sensor semantics,
/// zero measurement offset).
pub fn posterior_from_a(
    a: &DMatrix<f64>,
    prior: &PriorCovariance,
    noise: &NoiseModel,
) -> Result<Posterior, EstimateError> {
    let offset = DVector::zeros(a.nrows());
    assemble_posterior(a.clone(), prior, noise, offset)
}

/// Posterior-mean coefficients for measurements y (centered internally).
pub fn map_coefficients(post: &Posterior, y: &DVector<f64>) -> Result<DVector<f64>, EstimateError> {
    validate_finite_vec(y)?;
    check_measurement_len(y.len(), post.map_operator.ncols())?;
    Ok(&post.map_operator * (y - &post.y_offset))
}

/// Posterior-mean estimate lifted to the full grid: ū + Φ·m_MAP.
pub fn map_estimate(
    post: &Posterior,
    basis: &ModalBasis,
    y: &DVector<f64>,
) -> Result<Estimate, EstimateError> {
    let coefficients = map_coefficients(post, y)?;
    if coefficients.len() != basis.n_modes() {
        return Err(NumericsError::ShapeMismatch {
            context: format!(
                "posterior covers {} modes but the basis has {}",
                coefficients.len(),
                basis.n_modes()
            ),
        }
        .into());
    }
    let full_state = &basis.mean + &basis.phi * &coefficients;
    Ok(Estimate {
        coefficients,
        full_state,
        method: EstimateMethod::Map,
    })
}

/// ‖û − u‖₂ / ‖u‖₂ on full states.
pub fn relative_error(estimate: &Estimate, truth: &DVector<f64>) -> Result<f64, EstimateError> {
    if estimate.full_state.len() != truth.len() {
        return Err(NumericsError::ShapeMismatch {
            context: format!(
                "estimate has {} entries, truth has {}",
                estimate.full_state.len(),
                truth.len()
            ),
        }
        .into());
    }
    let denom = truth.norm();
    if denom == 0.0 {
        return Err(EstimateError::ZeroTruth);
    }
    Ok((&estimate.full_state - truth).norm() / denom)
}

/// A-priori bound on the Bayesian estimate's relative error:
/// ‖D − I‖₂ + ‖Γ_postAᵀ/σ²‖₂·ratio with D = Φ·(Γ_postAᵀ/σ²)·Sᵀ and
/// ratio = ‖η‖/‖u‖.
pub fn map_error_bound(
    post: &Posterior,
    basis: &ModalBasis,
    sel: &SensorSelection,
    noise_norm_ratio: f64,
) -> Result<f64, EstimateError> {
    let n_loc = basis.n_dims();
    let lifted = &basis.phi * &post.map_operator; // N×k
    let mut d = DMatrix::<f64>::zeros(n_loc, n_loc);
    for (j, &col) in sel.indices().iter().enumerate() {
        d.set_column(col, &lifted.column(j));
    }
    let d_minus_i = d - DMatrix::identity(n_loc, n_loc);
    let reconstruction_term = spectral_norm(&d_minus_i)?;
    let noise_term = spectral_norm(&post.map_operator)?;
    Ok(reconstruction_term + noise_term * noise_norm_ratio)
}

/// A-priori bound on the interpolation estimate's relative error:
/// (1/σ_min⁺(SᵀΦ))·(1 + ratio), σ_min⁺ the smallest nonzero singular value.
pub fn deim_error_bound(
    basis: &ModalBasis,
    sel: &SensorSelection,
    noise_norm_ratio: f64,
) -> Result<f64, EstimateError> {
    let a = sel.gather_rows(&basis.phi)?;
    let svd = econ_svd(&a)?;
    let tol = rank_tolerance(a.nrows(), a.ncols(), svd.s[0]);
    let smallest_nonzero = svd.s.iter().copied().rfind(|&v| v > tol);
    match smallest_nonzero {
        Some(s) => Ok((1.0 / s) * (1.0 + noise_norm_ratio)),
        None => Err(EstimateError::DegenerateMeasurementMap),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::test_support::{random_matrix, random_spd, rng};
    use crate::numerics::sym_eig;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn identity_basis(n_loc: usize, n: usize) -> ModalBasis {
        ModalBasis {
            phi: DMatrix::identity(n_loc, n),
            singular_values: DVector::from_element(n, 1.0),
            n_samples_used: 10,
            mean: DVector::zeros(n_loc),
        }
    }

    fn orthonormal_basis(seed: u64, n_loc: usize, n: usize) -> ModalBasis {
        let mut r = rng(seed);
        let m = random_matrix(&mut r, n_loc, n);
        let svd = econ_svd(&m).unwrap();
        ModalBasis {
            phi: svd.u.columns(0, n).into_owned(),
            singular_values: DVector::from_element(n, 1.0),
            n_samples_used: 10,
            mean: DVector::zeros(n_loc),
        }
    }

    fn unit_prior(n: usize) -> PriorCovariance {
        PriorCovariance::from_diagonal(&DVector::from_element(n, 1.0)).unwrap()
    }

    #[test]
    fn posterior_matches_hand_case() {
        let basis = identity_basis(2, 2);
        let sel = SensorSelection::new(vec![0], 2).unwrap();
        let post =
            build_posterior(&basis, &sel, &unit_prior(2), &NoiseModel::new(1.0).unwrap()).unwrap();
        assert!((post.gamma_post[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((post.gamma_post[(1, 1)] - 1.0).abs() < 1e-12);
        assert!(post.gamma_post[(0, 1)].abs() < 1e-12);

        let est = map_estimate(&post, &basis, &DVector::from_vec(vec![2.0])).unwrap();
        assert!((est.coefficients[0] - 1.0).abs() < 1e-12);
        assert!(est.coefficients[1].abs() < 1e-12);
        assert!((est.full_state[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_sensors_returns_the_prior() {
        let basis = orthonormal_basis(3, 6, 3);
        let sel = SensorSelection::new(vec![], 6).unwrap();
        let prior = unit_prior(3);
        let post =
            build_posterior(&basis, &sel, &prior, &NoiseModel::new(0.5).unwrap()).unwrap();
        assert!((&post.gamma_post - prior.matrix()).amax() < 1e-12);

        // zero measurements give the prior-mean reconstruction ū
        let est = map_estimate(&post, &basis, &DVector::zeros(0)).unwrap();
        assert!(est.coefficients.amax() < 1e-15);
        assert!((est.full_state - &basis.mean).amax() < 1e-15);
    }

    #[test]
    fn large_noise_recovers_the_prior_monotonically() {
        let basis = orthonormal_basis(5, 7, 3);
        let sel = SensorSelection::new(vec![0, 3, 6], 7).unwrap();
        let prior = unit_prior(3);
        let gap = |sigma: f64| {
            let post =
                build_posterior(&basis, &sel, &prior, &NoiseModel::new(sigma).unwrap()).unwrap();
            (&post.gamma_post - prior.matrix()).amax()
        };
        let g3 = gap(1e3);
        let g6 = gap(1e6);
        assert!(g6 < g3, "larger sigma should sit closer to the prior");
        assert!(g6 < 1e-10);
    }

    #[test]
    fn interpolation_matches_measurements_when_square_and_invertible() {
        let basis = orthonormal_basis(11, 8, 4);
        let sel = SensorSelection::new(vec![0, 2, 5, 7], 8).unwrap();
        let mut r = rng(12);
        let truth = DVector::<f64>::from_fn(8, |_, _| r.sample(StandardNormal));
        let y = sel.gather_vec(&truth).unwrap();
        let est = deim_estimate(&basis, &sel, &y).unwrap();
        let at_sensors = sel.gather_vec(&est.full_state).unwrap();
        assert!((at_sensors - y).amax() < 1e-9);
    }

    #[test]
    fn interpolation_is_exact_on_identity_basis() {
        let basis = identity_basis(4, 4);
        let sel = SensorSelection::new(vec![1, 3], 4).unwrap();
        let truth = DVector::from_vec(vec![4.0, -1.0, 2.0, 7.0]);
        let y = sel.gather_vec(&truth).unwrap();
        let est = deim_estimate(&basis, &sel, &y).unwrap();
        assert!((est.full_state[1] - truth[1]).abs() < 1e-12);
        assert!((est.full_state[3] - truth[3]).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_map_returns_minimum_norm_solution() {
        // 2 sensors, 3 modes: the normal equations have a null space
        let basis = orthonormal_basis(17, 6, 3);
        let sel = SensorSelection::new(vec![1, 4], 6).unwrap();
        let y = DVector::from_vec(vec![0.7, -0.3]);
        let est = deim_estimate(&basis, &sel, &y).unwrap();
        let a = sel.gather_rows(&basis.phi).unwrap();

        // A is 2×3, so its null direction is the cross product of its rows
        let r0 = nalgebra::Vector3::new(a[(0, 0)], a[(0, 1)], a[(0, 2)]);
        let r1 = nalgebra::Vector3::new(a[(1, 0)], a[(1, 1)], a[(1, 2)]);
        let cross = r0.cross(&r1);
        let null_dir = DVector::from_vec(vec![cross[0], cross[1], cross[2]]).normalize();
        assert!((&a * &null_dir).amax() < 1e-10, "should be a null direction");
        for t in [-1.0, -0.1, 0.1, 1.0] {
            let other = &est.coefficients + null_dir.scale(t);
            let residual = (&a * &other - &y).amax();
            assert!(residual < 1e-9, "alternative must also solve the system");
            assert!(other.norm() >= est.coefficients.norm() - 1e-12);
        }
    }

    #[test]
    fn small_noise_map_agrees_with_interpolation() {
        let basis = orthonormal_basis(23, 9, 3);
        let sel = SensorSelection::new(vec![0, 4, 8], 9).unwrap();
        let prior = unit_prior(3);
        let noise = NoiseModel::new(1e-6).unwrap();
        let y = DVector::from_vec(vec![0.4, -0.9, 0.2]);
        let ls = deim_estimate(&basis, &sel, &y).unwrap();
        let post = build_posterior(&basis, &sel, &prior, &noise).unwrap();
        let map = map_estimate(&post, &basis, &y).unwrap();
        let gap = (&map.coefficients - &ls.coefficients).norm();
        assert!(gap <= 1e-3 * ls.coefficients.norm().max(1.0), "gap {gap}");
    }

    #[test]
    fn posterior_never_exceeds_the_prior() {
        for seed in 0..5 {
            let basis = orthonormal_basis(30 + seed, 8, 4);
            let mut r = rng(60 + seed);
            let prior = PriorCovariance::from_matrix(&random_spd(&mut r, 4, 1e-3)).unwrap();
            let sel = SensorSelection::new(vec![0, 3, 6], 8).unwrap();
            let post =
                build_posterior(&basis, &sel, &prior, &NoiseModel::new(0.3).unwrap()).unwrap();
            let diff = prior.matrix() - &post.gamma_post;
            let (values, _) = sym_eig(&diff).unwrap();
            let norm = spectral_norm(prior.matrix()).unwrap();
            assert!(values[values.len() - 1] >= -1e-10 * norm);
        }
    }

    #[test]
    fn adding_a_sensor_never_increases_posterior_trace() {
        let basis = orthonormal_basis(41, 10, 4);
        let prior = unit_prior(4);
        let noise = NoiseModel::new(0.4).unwrap();
        let base_idx = vec![2, 7];
        let base = SensorSelection::new(base_idx.clone(), 10).unwrap();
        let base_trace = build_posterior(&basis, &base, &prior, &noise)
            .unwrap()
            .gamma_post
            .trace();
        for extra in [0usize, 4, 9] {
            let mut idx = base_idx.clone();
            idx.push(extra);
            let bigger = SensorSelection::new(idx, 10).unwrap();
            let t = build_posterior(&basis, &bigger, &prior, &noise)
                .unwrap()
                .gamma_post
                .trace();
            assert!(t <= base_trace + 1e-10);
        }
    }

    #[test]
    fn relative_error_hand_values() {
        let truth = DVector::from_vec(vec![3.0, 4.0]);
        let exact = Estimate {
            coefficients: DVector::zeros(1),
            full_state: truth.clone(),
            method: EstimateMethod::Deim,
        };
        assert!(relative_error(&exact, &truth).unwrap().abs() < 1e-15);

        let zero = Estimate {
            full_state: DVector::zeros(2),
            ..exact.clone()
        };
        assert!((relative_error(&zero, &truth).unwrap() - 1.0).abs() < 1e-15);

        let double = Estimate {
            full_state: truth.scale(2.0),
            ..exact.clone()
        };
        assert!((relative_error(&double, &truth).unwrap() - 1.0).abs() < 1e-15);

        assert!(matches!(
            relative_error(&exact, &DVector::zeros(2)),
            Err(EstimateError::ZeroTruth)
        ));
    }

    /// Spectral norm by power iteration on BᵀB — independent of the SVD path.
    fn power_iteration_norm(b: &DMatrix<f64>, seed: u64) -> f64 {
        let gram = b.transpose() * b;
        let mut r = rng(seed);
        let mut v = DVector::<f64>::from_fn(gram.nrows(), |_, _| r.sample(StandardNormal));
        v /= v.norm();
        for _ in 0..2000 {
            let w = &gram * &v;
            let n = w.norm();
            if n == 0.0 {
                return 0.0;
            }
            v = w / n;
        }
        (&gram * &v).dot(&v).max(0.0).sqrt()
    }

    #[test]
    fn map_bound_terms_match_power_iteration_oracle() {
        let basis = orthonormal_basis(51, 8, 3);
        let sel = SensorSelection::new(vec![1, 4, 6], 8).unwrap();
        let prior = unit_prior(3);
        let post =
            build_posterior(&basis, &sel, &prior, &NoiseModel::new(0.2).unwrap()).unwrap();

        let zero_noise_bound = map_error_bound(&post, &basis, &sel, 0.0).unwrap();
        let with_noise = map_error_bound(&post, &basis, &sel, 0.7).unwrap();

        let lifted = &basis.phi * &post.map_operator;
        let mut d = DMatrix::<f64>::zeros(8, 8);
        for (j, &col) in sel.indices().iter().enumerate() {
            d.set_column(col, &lifted.column(j));
        }
        let d_term = power_iteration_norm(&(d - DMatrix::identity(8, 8)), 99);
        let op_term = power_iteration_norm(&post.map_operator, 98);
        assert!((zero_noise_bound - d_term).abs() < 1e-8);
        assert!((with_noise - (d_term + 0.7 * op_term)).abs() < 1e-8);
    }

    #[test]
    fn interpolation_bound_hand_cases() {
        // orthonormal SᵀΦ: full identity sensing of an identity basis
        let basis = identity_basis(3, 3);
        let sel = SensorSelection::new(vec![0, 1, 2], 3).unwrap();
        let bound = deim_error_bound(&basis, &sel, 0.25).unwrap();
        assert!((bound - 1.25).abs() < 1e-12);

        // 1/sigma_min matches the pseudoinverse spectral norm
        let basis = orthonormal_basis(61, 7, 3);
        let sel = SensorSelection::new(vec![0, 2, 5], 7).unwrap();
        let a = sel.gather_rows(&basis.phi).unwrap();
        let pinv_norm = spectral_norm(&crate::numerics::pseudoinverse(&a).unwrap()).unwrap();
        let bound = deim_error_bound(&basis, &sel, 0.0).unwrap();
        assert!((bound - pinv_norm).abs() < 1e-9 * pinv_norm);

        // all-zero map is rejected
        let zero_basis = ModalBasis {
            phi: DMatrix::zeros(4, 2),
            singular_values: DVector::from_element(2, 1.0),
            n_samples_used: 10,
            mean: DVector::zeros(4),
        };
        let sel = SensorSelection::new(vec![0, 1], 4).unwrap();
        assert!(matches!(
            deim_error_bound(&zero_basis, &sel, 0.0),
            Err(EstimateError::DegenerateMeasurementMap)
        ));
    }

    #[test]
    fn zero_noise_is_rejected_for_posteriors() {
        let basis = identity_basis(2, 2);
        let sel = SensorSelection::new(vec![0], 2).unwrap();
        let noise = NoiseModel::new(0.0).unwrap();
        assert!(matches!(
            build_posterior(&basis, &sel, &unit_prior(2), &noise),
            Err(EstimateError::ZeroNoise { .. })
        ));
    }
}
