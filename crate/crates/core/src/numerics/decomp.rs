//! Economical SVD, symmetric eigendecomposition, and Cholesky kernels.
//!
//! The SVD and symmetric-eigen routines wrap nalgebra's implicit-shift
//! iterations behind this crate's contracts: descending-sorted spectra,
//! finite-input validation, and convergence failures surfaced as errors with
//! iteration diagnostics. Because the implicit-shift SVD can silently
//! mispair factors on exactly rank-deficient inputs, every factorization is
//! verified against the reconstruction contract ‖U·diag(s)·Vᵀ − M‖ ≤
//! [`SVD_RECON_TOL_REL`]·‖M‖_F; on violation a one-sided Jacobi SVD — slower
//! but unconditionally stable — recomputes it. The Cholesky factorization is
//! written out directly so that a failure can name the first non-positive
//! leading principal minor, which downstream code uses to distinguish
//! "prior is singular" from other numerical trouble.

use nalgebra::{DMatrix, DVector};

use super::{
    validate_finite, NumericsError, MAX_DECOMP_ITERATIONS, SYMMETRY_TOL_REL,
};

/// Economical singular value decomposition M = U·diag(s)·Vᵀ with
/// r = min(rows, cols) retained values.
#[derive(Debug, Clone)]
pub struct EconSvd {
    /// Left singular vectors, rows × r, orthonormal columns.
    pub u: DMatrix<f64>,
    /// Singular values, length r, nonnegative and non-increasing.
    pub s: DVector<f64>,
    /// Right singular vectors transposed, r × cols, orthonormal rows.
    pub vt: DMatrix<f64>,
}

/// Relative reconstruction tolerance enforced on every SVD: the factors are
/// rejected (and recomputed by the Jacobi path) unless
/// ‖U·diag(s)·Vᵀ − M‖_F ≤ SVD_RECON_TOL_REL·‖M‖_F.
pub const SVD_RECON_TOL_REL: f64 = 1e-10;

/// Maximum one-sided Jacobi sweeps before giving up.
const JACOBI_MAX_SWEEPS: usize = 60;

/// Economical SVD of a nonempty matrix; singular values sorted descending.
///
/// Reconstruction U·diag(s)·Vᵀ matches the input to
/// [`SVD_RECON_TOL_REL`]·‖M‖_F — checked, not assumed: if the fast
/// implicit-shift factorization violates the contract (it can mispair
/// factors on exactly rank-deficient inputs), a one-sided Jacobi SVD
/// recomputes it.
pub fn econ_svd(m: &DMatrix<f64>) -> Result<EconSvd, NumericsError> {
    validate_finite(m)?;
    if m.is_empty() {
        return Err(NumericsError::Empty {
            context: "econ_svd requires a nonempty matrix",
        });
    }
    if let Some(svd) = nalgebra::SVD::try_new(
        m.clone_owned(),
        true,
        true,
        f64::EPSILON,
        MAX_DECOMP_ITERATIONS,
    ) {
        let mut candidate = EconSvd {
            u: svd.u.expect("u requested from SVD"),
            s: svd.singular_values,
            vt: svd.v_t.expect("v_t requested from SVD"),
        };
        sort_svd_descending(&mut candidate);
        if factors_reconstruct(m, &candidate) {
            return Ok(candidate);
        }
    }
    jacobi_econ_svd(m)
}

/// Reorders the factors so singular values are non-increasing; no-op if
/// already sorted (the common case).
fn sort_svd_descending(svd: &mut EconSvd) {
    let r = svd.s.len();
    if svd.s.as_slice().windows(2).all(|w| w[0] >= w[1]) {
        return;
    }
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| svd.s[b].partial_cmp(&svd.s[a]).expect("finite spectrum"));
    let mut u = DMatrix::<f64>::zeros(svd.u.nrows(), r);
    let mut s = DVector::<f64>::zeros(r);
    let mut vt = DMatrix::<f64>::zeros(r, svd.vt.ncols());
    for (pos, &idx) in order.iter().enumerate() {
        u.set_column(pos, &svd.u.column(idx));
        s[pos] = svd.s[idx];
        vt.set_row(pos, &svd.vt.row(idx));
    }
    svd.u = u;
    svd.s = s;
    svd.vt = vt;
}

/// Reconstruction contract: nonnegative spectrum and
/// ‖U·diag(s)·Vᵀ − M‖ ≤ [`SVD_RECON_TOL_REL`]·‖M‖_F.
fn factors_reconstruct(m: &DMatrix<f64>, svd: &EconSvd) -> bool {
    if svd.s.iter().any(|&x| x < 0.0) {
        return false;
    }
    let recon = &svd.u * DMatrix::from_diagonal(&svd.s) * &svd.vt;
    (recon - m).norm() <= SVD_RECON_TOL_REL * m.norm().max(f64::MIN_POSITIVE)
}

/// One-sided Jacobi SVD: orthogonalizes the columns of the factor side with
/// plane rotations until all pairwise inner products vanish relative to the
/// column norms. Unconditionally stable and accurate for rank-deficient
/// inputs, at the price of more flops than the implicit-shift path.
fn jacobi_econ_svd(m: &DMatrix<f64>) -> Result<EconSvd, NumericsError> {
    // Operate on the side with fewer columns; transpose swaps U and V.
    if m.ncols() > m.nrows() {
        let svd = jacobi_econ_svd(&m.transpose())?;
        return Ok(EconSvd {
            u: svd.vt.transpose(),
            s: svd.s,
            vt: svd.u.transpose(),
        });
    }
    let (rows, cols) = (m.nrows(), m.ncols());
    let mut w = m.clone_owned();
    let mut v = DMatrix::<f64>::identity(cols, cols);

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..cols {
            for j in (i + 1)..cols {
                let wi = w.column(i).into_owned();
                let wj = w.column(j).into_owned();
                let alpha = wi.norm_squared();
                let beta = wj.norm_squared();
                let gamma = wi.dot(&wj);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let tau = (beta - alpha) / (2.0 * gamma);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..rows {
                    let (a, b) = (w[(r, i)], w[(r, j)]);
                    w[(r, i)] = c * a - s * b;
                    w[(r, j)] = s * a + c * b;
                }
                for r in 0..cols {
                    let (a, b) = (v[(r, i)], v[(r, j)]);
                    v[(r, i)] = c * a - s * b;
                    v[(r, j)] = s * a + c * b;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(NumericsError::NoConvergence {
            op: "one-sided Jacobi singular value decomposition",
            max_iterations: JACOBI_MAX_SWEEPS,
        });
    }

    // Column norms are the singular values; sort descending, indices stable.
    let mut order: Vec<usize> = (0..cols).collect();
    let norms: Vec<f64> = (0..cols).map(|i| w.column(i).norm()).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).expect("finite norms"));

    let mut u = DMatrix::<f64>::zeros(rows, cols);
    let mut s = DVector::<f64>::zeros(cols);
    let mut vt = DMatrix::<f64>::zeros(cols, cols);
    for (pos, &idx) in order.iter().enumerate() {
        s[pos] = norms[idx];
        if norms[idx] > 0.0 {
            u.set_column(pos, &(w.column(idx) / norms[idx]));
        }
        vt.set_row(pos, &v.column(idx).transpose());
    }
    // Columns for exactly zero singular values: complete an orthonormal set
    // so Uᵀ·U = I holds regardless of rank.
    for pos in 0..cols {
        if s[pos] > 0.0 {
            continue;
        }
        let mut best: Option<DVector<f64>> = None;
        let mut best_norm = 0.0;
        for seed in 0..rows {
            let mut candidate = DVector::<f64>::zeros(rows);
            candidate[seed] = 1.0;
            for other in 0..cols {
                if other == pos {
                    continue;
                }
                let col = u.column(other);
                let proj = col.dot(&candidate);
                candidate -= col * proj;
            }
            let norm = candidate.norm();
            if norm > best_norm {
                best_norm = norm;
                best = Some(candidate / norm);
            }
            if best_norm > 0.5 {
                break;
            }
        }
        if let Some(col) = best {
            u.set_column(pos, &col);
        }
    }
    Ok(EconSvd { u, s, vt })
}

/// Symmetric eigendecomposition with eigenvalues sorted descending and
/// matching orthonormal eigenvector columns.
///
/// The input may deviate from exact symmetry by at most
/// [`SYMMETRY_TOL_REL`]·‖M‖_max (it is symmetrized internally); anything
/// worse is rejected as an input error.
pub fn sym_eig(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>), NumericsError> {
    validate_finite(m)?;
    if m.is_empty() {
        return Err(NumericsError::Empty {
            context: "sym_eig requires a nonempty matrix",
        });
    }
    if !m.is_square() {
        return Err(NumericsError::ShapeMismatch {
            context: format!("sym_eig requires a square matrix, got {}x{}", m.nrows(), m.ncols()),
        });
    }
    let scale = m.amax();
    let deviation = (m - m.transpose()).amax();
    let tolerance = SYMMETRY_TOL_REL * scale;
    if deviation > tolerance {
        return Err(NumericsError::Asymmetric { deviation, tolerance });
    }
    let symmetrized = (m + m.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::try_new(symmetrized, f64::EPSILON, MAX_DECOMP_ITERATIONS)
        .ok_or(NumericsError::NoConvergence {
            op: "symmetric eigendecomposition",
            max_iterations: MAX_DECOMP_ITERATIONS,
        })?;

    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .expect("eigenvalues of a finite symmetric matrix are finite")
    });
    let values = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Cholesky factorization M = L·Lᵀ of a symmetric positive-definite matrix,
/// returning the lower-triangular factor L.
///
/// Only the lower triangle of `m` (diagonal included) is read. A non-positive
/// pivot at step j means the leading principal minor of order j+1 is not
/// positive; the error reports that one-based order.
pub fn cholesky_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>, NumericsError> {
    validate_finite(m)?;
    if m.is_empty() {
        return Err(NumericsError::Empty {
            context: "cholesky_spd requires a nonempty matrix",
        });
    }
    if !m.is_square() {
        return Err(NumericsError::ShapeMismatch {
            context: format!(
                "cholesky_spd requires a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            ),
        });
    }
    let n = m.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(NumericsError::NotPositiveDefinite { minor: j + 1 });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves L·Lᵀ·X = B given the lower-triangular Cholesky factor L, by
/// forward then backward substitution (one pass per column of B).
pub fn cholesky_solve(l: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>, NumericsError> {
    if l.nrows() != b.nrows() {
        return Err(NumericsError::ShapeMismatch {
            context: format!(
                "cholesky_solve: factor is {}x{} but right-hand side has {} rows",
                l.nrows(),
                l.ncols(),
                b.nrows()
            ),
        });
    }
    let n = l.nrows();
    let mut x = b.clone_owned();
    for c in 0..x.ncols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in (i + 1)..n {
                s -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    Ok(x)
}

/// log det M for symmetric positive-definite M, computed as twice the sum of
/// the logs of the Cholesky diagonal — the determinant itself is never
/// formed, so the value stays finite for badly scaled matrices.
pub fn logdet_spd(m: &DMatrix<f64>) -> Result<f64, NumericsError> {
    let l = cholesky_spd(m)?;
    Ok((0..l.nrows()).map(|j| 2.0 * l[(j, j)].ln()).sum())
}
