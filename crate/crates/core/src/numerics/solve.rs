//! Minimum-norm least squares and pseudoinverse assembly via truncated SVD.
//!
//! For A = U·diag(s)·Vᵀ the Moore–Penrose pseudoinverse is A⁺ = V·diag(s⁺)·Uᵀ
//! where s⁺ inverts singular values above the numerical-rank cutoff and zeros
//! the rest. `min_norm_solve` applies A⁺ to one right-hand side without
//! forming it; `pseudoinverse` materializes it for formulas that need the
//! matrix itself (risk terms, projectors).

use nalgebra::{DMatrix, DVector};

use super::{econ_svd, rank_tolerance, validate_finite_vec, NumericsError};

/// Minimum-norm least-squares solution A⁺·y: among all minimizers of
/// ‖y − Ax‖₂ the one of minimal ‖x‖₂. Singular values at or below the
/// numerical-rank cutoff are treated as zero.
pub fn min_norm_solve(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>, NumericsError> {
    if a.nrows() != y.len() {
        return Err(NumericsError::ShapeMismatch {
            context: format!(
                "min_norm_solve: matrix is {}x{} but right-hand side has length {}",
                a.nrows(),
                a.ncols(),
                y.len()
            ),
        });
    }
    validate_finite_vec(y)?;
    let svd = econ_svd(a)?;
    let cutoff = rank_tolerance(a.nrows(), a.ncols(), svd.s[0]);
    let mut coeff = svd.u.transpose() * y;
    for i in 0..coeff.len() {
        if svd.s[i] > cutoff {
            coeff[i] /= svd.s[i];
        } else {
            coeff[i] = 0.0;
        }
    }
    Ok(svd.vt.transpose() * coeff)
}

/// Moore–Penrose pseudoinverse A⁺ assembled from the truncated SVD.
pub fn pseudoinverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>, NumericsError> {
    let svd = econ_svd(a)?;
    let cutoff = rank_tolerance(a.nrows(), a.ncols(), svd.s[0]);
    let mut v = svd.vt.transpose(); // cols × r
    for i in 0..svd.s.len() {
        let factor = if svd.s[i] > cutoff { 1.0 / svd.s[i] } else { 0.0 };
        v.column_mut(i).scale_mut(factor);
    }
    Ok(v * svd.u.transpose())
}

/// Numerical rank: count of singular values above the
/// [`rank_tolerance`] cutoff.
pub fn numerical_rank(a: &DMatrix<f64>) -> Result<usize, NumericsError> {
    let svd = econ_svd(a)?;
    let cutoff = rank_tolerance(a.nrows(), a.ncols(), svd.s[0]);
    Ok(svd.s.iter().filter(|&&s| s > cutoff).count())
}

/// Spectral norm ‖A‖₂ (largest singular value).
pub fn spectral_norm(a: &DMatrix<f64>) -> Result<f64, NumericsError> {
    Ok(econ_svd(a)?.s[0])
}
