//! Sensor selection and its information-theoretic objectives.
//!
//! A selection S of k grid rows turns the modal basis Φ (N×n) into the
//! measurement map A = SᵀΦ. The D-optimal objective is
//! Θ_D(S) = log det Γ_post(S) with Γ_post(S) = (Γ_prior⁻¹ + σ⁻²AᵀA)⁻¹,
//! and the information gain is J_D(S) = Θ_D(∅) − Θ_D(S), equal to
//! log det(I + F_S F_Sᵀ) for the whitened basis F = σ⁻¹Γ_prior^{1/2}Φᵀ.
//!
//! Four placement strategies are provided: column-pivoted QR on Φᵀ, CPQR on
//! the whitened F, greedy D-optimal (with an optional rank-1 fast path that
//! must match naive recomputation), and exhaustive D-optimal search behind a
//! subset-count budget. All tie-breaks are deterministic: greedy prefers the
//! smallest location index, exhaustive search the lexicographically smallest
//! subset.

use std::fmt;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::datasets::NoiseModel;
use crate::numerics::{cpqr, logdet_spd, NumericsError};
use crate::pod::{ModalBasis, PodError, PriorCovariance};

/// Errors from selection handling and placement searches.
#[derive(Debug, Error)]
pub enum PlacementError {
    #[error("sensor index {index} is out of range for {n_locations} locations")]
    IndexOutOfRange { index: usize, n_locations: usize },
    #[error("sensor index {index} appears more than once")]
    DuplicateIndex { index: usize },
    #[error("requested {k} sensors but only {n_locations} locations exist")]
    TooManySensors { k: usize, n_locations: usize },
    #[error("selections refer to different grids: {left} vs {right} locations")]
    GridMismatch { left: usize, right: usize },
    #[error(
        "exhaustive search needs {required} subset evaluations, over the budget of {budget}"
    )]
    BudgetExceeded { required: u128, budget: u64 },
    #[error("information objectives need sigma > 0, got {sigma}")]
    ZeroNoise { sigma: f64 },
    #[error(transparent)]
    Pod(#[from] PodError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// An ordered set of distinct measured grid rows on an N-point grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensorSelection {
    indices: Vec<usize>,
    n_locations: usize,
}

impl SensorSelection {
    /// Validates distinctness and range; the given order is preserved (it is
    /// the greedy pick order or the pivot order of the producing algorithm).
    pub fn new(indices: Vec<usize>, n_locations: usize) -> Result<Self, PlacementError> {
        let mut seen = vec![false; n_locations];
        for &i in &indices {
            if i >= n_locations {
                return Err(PlacementError::IndexOutOfRange {
                    index: i,
                    n_locations,
                });
            }
            if seen[i] {
                return Err(PlacementError::DuplicateIndex { index: i });
            }
            seen[i] = true;
        }
        Ok(Self {
            indices,
            n_locations,
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn n_locations(&self) -> usize {
        self.n_locations
    }

    /// Rows of `m` at the selected indices, in selection order — SᵀM for the
    /// selection matrix S, so `gather_rows(Φ)` is the measurement map A.
    pub fn gather_rows(&self, m: &DMatrix<f64>) -> Result<DMatrix<f64>, PlacementError> {
        if m.nrows() != self.n_locations {
            return Err(PlacementError::GridMismatch {
                left: m.nrows(),
                right: self.n_locations,
            });
        }
        let mut out = DMatrix::zeros(self.len(), m.ncols());
        for (r, &i) in self.indices.iter().enumerate() {
            out.set_row(r, &m.row(i));
        }
        Ok(out)
    }

    /// Entries of `v` at the selected indices (Sᵀv).
    pub fn gather_vec(&self, v: &DVector<f64>) -> Result<DVector<f64>, PlacementError> {
        if v.len() != self.n_locations {
            return Err(PlacementError::GridMismatch {
                left: v.len(),
                right: self.n_locations,
            });
        }
        Ok(DVector::from_fn(self.len(), |r, _| v[self.indices[r]]))
    }
}

/// Which algorithm produced a selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlacementMethod {
    Cpqr,
    Qmap,
    GreedyD,
    BruteD,
}

impl fmt::Display for PlacementMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Cpqr => "cpqr",
            Self::Qmap => "qmap",
            Self::GreedyD => "greedy_d",
            Self::BruteD => "brute_d",
        };
        f.write_str(s)
    }
}

/// A placement outcome: the selection, its provenance, the per-step
/// objective values (greedy only: Θ_D(∅), then Θ_D after each pick), and the
/// wall-clock time the search took.
#[derive(Debug, Clone)]
pub struct PlacementResult {
    pub selection: SensorSelection,
    pub method: PlacementMethod,
    pub objective_trace: Vec<f64>,
    pub elapsed: Duration,
}

fn check_modes(basis: &ModalBasis, prior: &PriorCovariance) -> Result<(), PlacementError> {
    if prior.dim() != basis.n_modes() {
        return Err(NumericsError::ShapeMismatch {
            context: format!(
                "prior is {}x{} but the basis has {} modes",
                prior.dim(),
                prior.dim(),
                basis.n_modes()
            ),
        }
        .into());
    }
    Ok(())
}

fn check_sigma(noise: &NoiseModel) -> Result<f64, PlacementError> {
    if noise.sigma <= 0.0 {
        return Err(PlacementError::ZeroNoise { sigma: noise.sigma });
    }
    Ok(noise.variance())
}

/// Γ_post(S)⁻¹ = Γ_prior⁻¹ + σ⁻²AᵀA, symmetrized.
fn posterior_precision(
    basis: &ModalBasis,
    sel: &SensorSelection,
    prior: &PriorCovariance,
    sigma2: f64,
) -> Result<DMatrix<f64>, PlacementError> {
    let a = sel.gather_rows(&basis.phi)?;
    let m = prior.inverse()? + a.transpose() * &a / sigma2;
    Ok((&m + m.transpose()) * 0.5)
}

/// D-optimal objective Θ_D(S) = log det Γ_post(S); the empty selection gives
/// log det Γ_prior.
pub fn theta_d(
    basis: &ModalBasis,
    sel: &SensorSelection,
    prior: &PriorCovariance,
    noise: &NoiseModel,
) -> Result<f64, PlacementError> {
    check_modes(basis, prior)?;
    let sigma2 = check_sigma(noise)?;
    let m = posterior_precision(basis, sel, prior, sigma2)?;
    Ok(-logdet_spd(&m)?)
}

/// Expected information gain J_D(S) = Θ_D(∅) − Θ_D(S) ≥ 0.
pub fn info_gain(
    basis: &ModalBasis,
    sel: &SensorSelection,
    prior: &PriorCovariance,
    noise: &NoiseModel,
) -> Result<f64, PlacementError> {
    check_modes(basis, prior)?;
    let sigma2 = check_sigma(noise)?;
    let m = posterior_precision(basis, sel, prior, sigma2)?;
    Ok(prior.logdet()? + logdet_spd(&m)?)
}

/// The same gain through the whitened basis: log det(I_k + F_Sᵀ·F_S estimated
/// in the k×k form) for F = σ⁻¹Γ_prior^{1/2}Φᵀ; used as an independent
/// cross-check of [`info_gain`].
pub fn info_gain_whitened(
    basis: &ModalBasis,
    sel: &SensorSelection,
    prior: &PriorCovariance,
    noise: &NoiseModel,
) -> Result<f64, PlacementError> {
    check_modes(basis, prior)?;
    check_sigma(noise)?;
    if sel.is_empty() {
        return Ok(0.0);
    }
    let a = sel.gather_rows(&basis.phi)?;
    let root = prior.sqrt_matrix()?;
    let fs = root * a.transpose() / noise.sigma;
    let k = sel.len();
    let gram = DMatrix::identity(k, k) + fs.transpose() * &fs;
    Ok(logdet_spd(&((&gram + gram.transpose()) * 0.5))?)
}

/// Greedy D-optimal selection: k steps, each adding the location with the
/// largest objective gain (smallest index on exact ties).
///
/// With `use_rank1` the per-candidate gain is ln(1 + σ⁻²·φ_ℓᵀPφ_ℓ) on a
/// running posterior covariance P updated by the rank-1 determinant-lemma
/// step; otherwise every candidate objective is recomputed from scratch.
/// Both paths must agree (and a test holds them to 1e-8 relative).
pub fn place_greedy_d(
    basis: &ModalBasis,
    prior: &PriorCovariance,
    noise: &NoiseModel,
    k: usize,
    use_rank1: bool,
) -> Result<PlacementResult, PlacementError> {
    let start = Instant::now();
    check_modes(basis, prior)?;
    let sigma2 = check_sigma(noise)?;
    let n_loc = basis.n_dims();
    if k > n_loc {
        return Err(PlacementError::TooManySensors {
            k,
            n_locations: n_loc,
        });
    }

    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut used = vec![false; n_loc];
    let mut theta = prior.logdet()?;
    let mut trace = vec![theta];

    if use_rank1 {
        let mut p = prior.matrix().clone();
        for _step in 0..k {
            let mut best: Option<(usize, f64)> = None;
            for (l, &is_used) in used.iter().enumerate() {
                if is_used {
                    continue;
                }
                let phi_l = basis.phi.row(l).transpose();
                let q = (phi_l.transpose() * &p * &phi_l)[(0, 0)].max(0.0);
                match best {
                    Some((_, best_q)) if q <= best_q => {}
                    _ => best = Some((l, q)),
                }
            }
            let (l, q) = best.expect("k <= n_locations leaves a candidate");
            let phi_l = basis.phi.row(l).transpose();
            let pv = &p * &phi_l;
            p -= &pv * pv.transpose() / (sigma2 + q);
            p = (&p + p.transpose()) * 0.5;
            used[l] = true;
            chosen.push(l);
            theta -= (1.0 + q / sigma2).ln();
            trace.push(theta);
        }
    } else {
        for _step in 0..k {
            let mut best: Option<(usize, f64)> = None;
            for (l, &is_used) in used.iter().enumerate() {
                if is_used {
                    continue;
                }
                let mut candidate = chosen.clone();
                candidate.push(l);
                let sel = SensorSelection::new(candidate, n_loc)?;
                let th = theta_d(basis, &sel, prior, noise)?;
                match best {
                    Some((_, best_th)) if th >= best_th => {}
                    _ => best = Some((l, th)),
                }
            }
            let (l, th) = best.expect("k <= n_locations leaves a candidate");
            used[l] = true;
            chosen.push(l);
            theta = th;
            trace.push(theta);
        }
    }

    Ok(PlacementResult {
        selection: SensorSelection::new(chosen, n_loc)?,
        method: PlacementMethod::GreedyD,
        objective_trace: trace,
        elapsed: start.elapsed(),
    })
}

/// C(n, k) — the number of k-subsets the exhaustive search must visit —
/// with saturation at u128::MAX (still correct for budget guards).
pub fn subset_count(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 1..=k {
        let factor = (n - k + i) as u128;
        c = match c.checked_mul(factor) {
            Some(v) => v / i as u128,
            None => return u128::MAX,
        };
    }
    c
}

/// Exhaustive D-optimal search over all k-subsets, maximizing the gain
/// J(S) = log det(I_k + σ⁻²·G[S,S]) with G = ΦΓ_priorΦᵀ precomputed (equal
/// to −Θ_D(S) up to the constant log det Γ_prior). Enumeration is
/// lexicographic; exact objective ties resolve to the lexicographically
/// smallest subset, in parallel as in serial.
pub fn place_brute_d(
    basis: &ModalBasis,
    prior: &PriorCovariance,
    noise: &NoiseModel,
    k: usize,
    budget: u64,
) -> Result<PlacementResult, PlacementError> {
    let start = Instant::now();
    check_modes(basis, prior)?;
    let sigma2 = check_sigma(noise)?;
    let n_loc = basis.n_dims();
    if k > n_loc {
        return Err(PlacementError::TooManySensors {
            k,
            n_locations: n_loc,
        });
    }
    let required = subset_count(n_loc, k);
    if required > budget as u128 {
        return Err(PlacementError::BudgetExceeded { required, budget });
    }
    if k == 0 {
        return Ok(PlacementResult {
            selection: SensorSelection::new(Vec::new(), n_loc)?,
            method: PlacementMethod::BruteD,
            objective_trace: Vec::new(),
            elapsed: start.elapsed(),
        });
    }

    let g = &basis.phi * prior.matrix() * basis.phi.transpose();

    let gain_of = |subset: &[usize]| -> Result<f64, PlacementError> {
        let mut m = DMatrix::identity(k, k);
        for (r, &i) in subset.iter().enumerate() {
            for (c, &j) in subset.iter().enumerate() {
                m[(r, c)] += g[(i, j)] / sigma2;
            }
        }
        let m = (&m + m.transpose()) * 0.5;
        Ok(logdet_spd(&m)?)
    };

    // One enumeration branch per first element; each branch walks its
    // combinations lexicographically, so the branch-local best is already
    // the lexicographically smallest among branch-local ties.
    let branch_best = |first: usize| -> Result<Option<(f64, Vec<usize>)>, PlacementError> {
        let mut subset: Vec<usize> = (0..k).map(|i| first + i).collect();
        if *subset.last().unwrap() >= n_loc {
            return Ok(None);
        }
        let mut best: Option<(f64, Vec<usize>)> = None;
        loop {
            let j = gain_of(&subset)?;
            let better = match &best {
                Some((best_j, _)) => j > *best_j,
                None => true,
            };
            if better {
                best = Some((j, subset.clone()));
            }
            // next combination with the first element fixed
            let mut pos = k - 1;
            loop {
                if pos == 0 {
                    return Ok(best);
                }
                if subset[pos] < n_loc - (k - pos) {
                    subset[pos] += 1;
                    for t in pos + 1..k {
                        subset[t] = subset[t - 1] + 1;
                    }
                    break;
                }
                pos -= 1;
            }
        }
    };

    let candidates: Vec<Option<(f64, Vec<usize>)>> = (0..=n_loc - k)
        .into_par_iter()
        .map(branch_best)
        .collect::<Result<_, _>>()?;

    let mut best: Option<(f64, Vec<usize>)> = None;
    for cand in candidates.into_iter().flatten() {
        best = match best {
            None => Some(cand),
            Some(cur) => {
                if cand.0 > cur.0 || (cand.0 == cur.0 && cand.1 < cur.1) {
                    Some(cand)
                } else {
                    Some(cur)
                }
            }
        };
    }
    let (_, subset) = best.expect("k <= n_locations yields at least one subset");

    Ok(PlacementResult {
        selection: SensorSelection::new(subset, n_loc)?,
        method: PlacementMethod::BruteD,
        objective_trace: Vec::new(),
        elapsed: start.elapsed(),
    })
}

/// Column-pivoted QR placement on Φᵀ: the first k pivots. Valid for k ≤ n
/// and k > n alike — past the basis rank the pivot ordering continues
/// deterministically (exhausted residuals order by index).
pub fn place_cpqr(basis: &ModalBasis, k: usize) -> Result<PlacementResult, PlacementError> {
    let start = Instant::now();
    let n_loc = basis.n_dims();
    if k > n_loc {
        return Err(PlacementError::TooManySensors {
            k,
            n_locations: n_loc,
        });
    }
    let fact = cpqr(&basis.phi.transpose())?;
    Ok(PlacementResult {
        selection: SensorSelection::new(fact.pivots[..k].to_vec(), n_loc)?,
        method: PlacementMethod::Cpqr,
        objective_trace: Vec::new(),
        elapsed: start.elapsed(),
    })
}

/// CPQR placement on the whitened basis F = σ⁻¹Γ_prior^{1/2}Φᵀ, which folds
/// prior variance and noise level into the pivot scores.
pub fn place_qmap(
    basis: &ModalBasis,
    prior: &PriorCovariance,
    noise: &NoiseModel,
    k: usize,
) -> Result<PlacementResult, PlacementError> {
    let start = Instant::now();
    check_modes(basis, prior)?;
    check_sigma(noise)?;
    let n_loc = basis.n_dims();
    if k > n_loc {
        return Err(PlacementError::TooManySensors {
            k,
            n_locations: n_loc,
        });
    }
    let f = prior.sqrt_matrix()? * basis.phi.transpose() / noise.sigma;
    let fact = cpqr(&f)?;
    Ok(PlacementResult {
        selection: SensorSelection::new(fact.pivots[..k].to_vec(), n_loc)?,
        method: PlacementMethod::Qmap,
        objective_trace: Vec::new(),
        elapsed: start.elapsed(),
    })
}

/// Set-overlap score 2|a∩b|/(|a|+|b|) between two selections on the same
/// grid. Two empty selections count as perfectly agreeing (1.0).
pub fn dice(a: &SensorSelection, b: &SensorSelection) -> Result<f64, PlacementError> {
    if a.n_locations != b.n_locations {
        return Err(PlacementError::GridMismatch {
            left: a.n_locations,
            right: b.n_locations,
        });
    }
    if a.is_empty() && b.is_empty() {
        return Ok(1.0);
    }
    let mut in_a = vec![false; a.n_locations];
    for &i in &a.indices {
        in_a[i] = true;
    }
    let common = b.indices.iter().filter(|&&i| in_a[i]).count();
    Ok(2.0 * common as f64 / (a.len() + b.len()) as f64)
}
