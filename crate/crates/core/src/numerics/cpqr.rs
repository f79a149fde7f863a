//! Column-pivoted QR with a deterministic greedy pivot policy.
//!
//! At step j the column whose residual (rows j and below, i.e. the part not
//! yet explained by previously pivoted columns) has maximal 2-norm is swapped
//! into position j and eliminated by a Householder reflection. Residual norms
//! are recomputed exactly at every step — no norm downdating — so the pivot
//! choice is free of the drift classical downdated implementations can
//! accumulate.
//!
//! Two policy details make the pivot sequence fully deterministic:
//!
//! * ties within [`PIVOT_TIE_REL`] relative of the maximal residual norm
//!   resolve to the smallest *original* column index;
//! * pivoting continues past the numerical rank (and past the row count for
//!   wide matrices), ordering the remaining columns by residual norm with the
//!   same tie rule, so a full permutation of all columns is always produced.
//!   Sensor placement needs k pivots even when k exceeds the basis rank.

use nalgebra::{DMatrix, DVector};

use super::{rank_tolerance, validate_finite, NumericsError, PIVOT_TIE_REL};

/// Result of [`cpqr`]: M·Π = Q·R with Q orthonormal (rows × s), R upper
/// trapezoidal (s × cols), s = min(rows, cols), and Π the column permutation
/// given by `pivots`.
#[derive(Debug, Clone)]
pub struct CpqrFactorization {
    /// Full permutation of the input's column indices, in pivot order:
    /// column `pivots[i]` of the input is column i of M·Π.
    pub pivots: Vec<usize>,
    /// Orthonormal factor, rows × min(rows, cols).
    pub q_factor: DMatrix<f64>,
    /// Upper-trapezoidal factor, min(rows, cols) × cols, with non-increasing
    /// nonnegative diagonal.
    pub r_factor: DMatrix<f64>,
    /// Count of diagonal entries of R above the numerical-rank cutoff
    /// ([`rank_tolerance`] of the largest diagonal entry).
    pub numerical_rank: usize,
}

/// Householder column-pivoted QR factorization of `m` (any shape, at least
/// one column) producing a deterministic pivot ordering over all columns.
///
/// The diagonal of R is made nonnegative by sign flips absorbed into Q, and
/// is non-increasing in magnitude by construction of the greedy pivot rule.
pub fn cpqr(m: &DMatrix<f64>) -> Result<CpqrFactorization, NumericsError> {
    validate_finite(m)?;
    if m.ncols() == 0 || m.nrows() == 0 {
        return Err(NumericsError::Empty {
            context: "cpqr requires at least one row and one column",
        });
    }

    let rows = m.nrows();
    let cols = m.ncols();
    let steps = rows.min(cols);

    let mut a = m.clone_owned();
    let mut pivots: Vec<usize> = (0..cols).collect();
    // Householder vectors (with their squared norms) for assembling Q.
    let mut reflectors: Vec<Option<(DVector<f64>, f64)>> = Vec::with_capacity(steps);
    // Residual norms at or below this snap to exactly zero, so the
    // below-rank tail is ordered purely by the first-index tie rule instead
    // of by rounding noise. Set from the largest column norm at step 0.
    let mut residual_floor = 0.0f64;

    for j in 0..cols {
        let best = select_pivot(&a, &pivots, j, &mut residual_floor);
        if best != j {
            a.swap_columns(j, best);
            pivots.swap(j, best);
        }

        if j >= steps {
            continue; // ordering-only phase: no rows left to eliminate
        }

        // Householder reflector zeroing a[j+1.., j].
        let len = rows - j;
        let mut v = DVector::<f64>::zeros(len);
        for i in 0..len {
            v[i] = a[(j + i, j)];
        }
        let norm_x = v.norm();
        if norm_x == 0.0 {
            reflectors.push(None);
            continue;
        }
        let alpha = if v[0] >= 0.0 { -norm_x } else { norm_x };
        v[0] -= alpha;
        let vsq = v.norm_squared();
        if vsq > 0.0 {
            for c in (j + 1)..cols {
                let mut dot = 0.0;
                for i in 0..len {
                    dot += v[i] * a[(j + i, c)];
                }
                let f = 2.0 * dot / vsq;
                for i in 0..len {
                    a[(j + i, c)] -= f * v[i];
                }
            }
        }
        a[(j, j)] = alpha;
        for i in (j + 1)..rows {
            a[(i, j)] = 0.0;
        }
        reflectors.push(if vsq > 0.0 { Some((v, vsq)) } else { None });
    }

    // Accumulate the economy Q by applying reflectors to I(rows × steps)
    // in reverse order.
    let mut q = DMatrix::<f64>::identity(rows, steps);
    for j in (0..reflectors.len()).rev() {
        if let Some((v, vsq)) = &reflectors[j] {
            for c in 0..steps {
                let mut dot = 0.0;
                for i in 0..v.len() {
                    dot += v[i] * q[(j + i, c)];
                }
                let f = 2.0 * dot / vsq;
                for i in 0..v.len() {
                    q[(j + i, c)] -= f * v[i];
                }
            }
        }
    }

    let mut r = a.rows(0, steps).clone_owned();
    // Nonnegative diagonal: flip row of R and matching column of Q together.
    for i in 0..steps {
        if r[(i, i)] < 0.0 {
            for c in i..cols {
                r[(i, c)] = -r[(i, c)];
            }
            for rr in 0..rows {
                q[(rr, i)] = -q[(rr, i)];
            }
        }
    }

    let cutoff = rank_tolerance(rows, cols, r[(0, 0)].abs());
    let numerical_rank = (0..steps).take_while(|&i| r[(i, i)].abs() > cutoff).count();

    Ok(CpqrFactorization {
        pivots,
        q_factor: q,
        r_factor: r,
        numerical_rank,
    })
}

/// Position (≥ j) of the pivot for step j: maximal residual 2-norm over rows
/// j.. (an empty residual counts as norm zero), ties within [`PIVOT_TIE_REL`]
/// relative resolved to the smallest original column index. Norms at or
/// below `residual_floor` (the rank-tolerance cutoff, fixed at step 0) snap
/// to zero first, so the sub-rank tail orders by index, not rounding noise.
fn select_pivot(a: &DMatrix<f64>, pivots: &[usize], j: usize, residual_floor: &mut f64) -> usize {
    let rows = a.nrows();
    let cols = a.ncols();
    let lo = j.min(rows);

    let mut norms = vec![0.0f64; cols - j];
    let mut max_norm = 0.0f64;
    for c in j..cols {
        let mut s = 0.0;
        for i in lo..rows {
            s += a[(i, c)] * a[(i, c)];
        }
        let nrm = if s.sqrt() > *residual_floor { s.sqrt() } else { 0.0 };
        norms[c - j] = nrm;
        if nrm > max_norm {
            max_norm = nrm;
        }
    }
    if j == 0 {
        *residual_floor = rank_tolerance(rows, cols, max_norm);
    }

    let mut best_pos = j;
    let mut best_orig = usize::MAX;
    for c in j..cols {
        if max_norm - norms[c - j] <= PIVOT_TIE_REL * max_norm && pivots[c] < best_orig {
            best_orig = pivots[c];
            best_pos = c;
        }
    }
    best_pos
}
