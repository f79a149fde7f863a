//! Dense linear-algebra kernels with explicit numerical contracts.
//!
//! Everything downstream is built on five operations: column-pivoted QR with
//! a deterministic greedy pivot policy ([`cpqr`]), economical SVD
//! ([`econ_svd`]), symmetric eigendecomposition with descending eigenvalues
//! ([`sym_eig`]), minimum-norm least-squares solves through the truncated
//! pseudoinverse ([`min_norm_solve`]), and Cholesky-based log-determinants of
//! symmetric positive-definite matrices ([`logdet_spd`]).
//!
//! All operations are deterministic given input bytes: no randomized kernels,
//! documented tie-breaking, and shared named tolerances. Matrices are dense,
//! real, and column-major ([`nalgebra::DMatrix<f64>`]); inputs are validated
//! to be finite at every public entry point.

mod cpqr;
mod decomp;
mod solve;

pub use cpqr::{cpqr, CpqrFactorization};
pub use decomp::{
    cholesky_solve, cholesky_spd, econ_svd, logdet_spd, sym_eig, EconSvd, SVD_RECON_TOL_REL,
};
pub use solve::{min_norm_solve, numerical_rank, pseudoinverse, spectral_norm};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Relative window within which residual column norms count as exactly tied
/// during pivot selection; ties resolve to the smallest original column
/// index, making pivot sequences deterministic and testable.
pub const PIVOT_TIE_REL: f64 = 1e-12;

/// Maximum allowed relative asymmetry ‖M − Mᵀ‖_max / ‖M‖_max before a
/// symmetric-eigendecomposition input is rejected. Inputs inside the window
/// are symmetrized internally as (M + Mᵀ)/2.
pub const SYMMETRY_TOL_REL: f64 = 1e-8;

/// Iteration cap handed to the iterative SVD and symmetric-eigen kernels.
/// Generous enough for any matrix this crate produces; exceeding it is
/// reported as a numerical error with the cap in the diagnostics.
pub const MAX_DECOMP_ITERATIONS: usize = 100_000;

/// Errors raised by the linear-algebra kernels.
#[derive(Debug, Error)]
pub enum NumericsError {
    /// Input contained a NaN or infinity.
    #[error("non-finite entry {value} at (row {row}, col {col})")]
    NonFinite {
        /// Zero-based row of the offending entry.
        row: usize,
        /// Zero-based column of the offending entry.
        col: usize,
        /// The offending value.
        value: f64,
    },
    /// Input matrix or vector has zero extent where data is required.
    #[error("empty input: {context}")]
    Empty {
        /// Which operation rejected the input.
        context: &'static str,
    },
    /// Dimensions of the inputs are mutually inconsistent.
    #[error("shape mismatch: {context}")]
    ShapeMismatch {
        /// Human-readable description of the expected and actual shapes.
        context: String,
    },
    /// Matrix failed the symmetry precondition.
    #[error("asymmetric input: max |M - M^T| entry {deviation:.6e} exceeds tolerance {tolerance:.6e}")]
    Asymmetric {
        /// Largest absolute entry of M − Mᵀ.
        deviation: f64,
        /// The admissible deviation for this input's magnitude.
        tolerance: f64,
    },
    /// An iterative decomposition exhausted its iteration budget.
    #[error("{op} did not converge within {max_iterations} iterations")]
    NoConvergence {
        /// The decomposition that failed.
        op: &'static str,
        /// The iteration cap that was exceeded.
        max_iterations: usize,
    },
    /// Cholesky factorization hit a non-positive pivot, i.e. the matrix is
    /// not positive definite.
    #[error("matrix is not positive definite: leading minor of order {minor} is not positive")]
    NotPositiveDefinite {
        /// One-based order of the first non-positive leading principal minor.
        minor: usize,
    },
}

/// Numerical-rank cutoff: singular (or pivot) values at or below
/// `max(rows, cols) · ε · largest` count as zero. The standard dense-matrix
/// rank tolerance.
pub fn rank_tolerance(rows: usize, cols: usize, largest: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * largest
}

/// Checks that every entry of `m` is finite, reporting the first offender's
/// position (column-major scan order).
pub fn validate_finite(m: &DMatrix<f64>) -> Result<(), NumericsError> {
    for col in 0..m.ncols() {
        for row in 0..m.nrows() {
            let value = m[(row, col)];
            if !value.is_finite() {
                return Err(NumericsError::NonFinite { row, col, value });
            }
        }
    }
    Ok(())
}

/// Vector variant of [`validate_finite`]; positions are reported as rows of a
/// single-column matrix.
pub fn validate_finite_vec(v: &DVector<f64>) -> Result<(), NumericsError> {
    for row in 0..v.len() {
        let value = v[row];
        if !value.is_finite() {
            return Err(NumericsError::NonFinite { row, col: 0, value });
        }
    }
    Ok(())
}
