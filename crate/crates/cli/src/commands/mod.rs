//! Subcommand implementations and the loaders they share.
//!
//! File conventions: snapshot matrices may be CSV or binary (`--format`),
//! while derived artifacts — basis, mean, prior, selection, estimates —
//! are always CSV with a `kind=` tag in the header so a file cannot be
//! silently used as the wrong thing.

pub mod dice;
pub mod experiment;
pub mod generate;
pub mod place;
pub mod pod;
pub mod reconstruct;
pub mod risk;

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use modalsense::datasets::io::{load_matrix, SnapshotFormat};
use modalsense::placement::SensorSelection;
use modalsense::pod::{ModalBasis, PriorCovariance};

use crate::errors::CliError;

/// Tolerance for the loaded-basis orthonormality check: ‖ΦᵀΦ − I‖_max must
/// not exceed this, or downstream least-squares identities silently degrade.
pub const BASIS_ORTHO_TOL: f64 = 1e-8;

/// Loads a basis matrix (always CSV) and verifies its columns are
/// orthonormal. The optional mean file fills `ModalBasis::mean`; without it
/// reconstructions treat the data as uncentered (zero mean).
///
/// The training spectrum and sample count are not stored in the basis file;
/// they are filled with neutral placeholders (ones / 2) that no estimation
/// or placement path reads. Presets that do need the spectrum
/// (`singular-values`, `pod-variance`) are only offered by `pod`, which
/// derives the prior directly from the training data.
pub fn load_basis(path: &Path, mean_path: Option<&Path>) -> Result<ModalBasis, CliError> {
    let (phi, kind) = load_matrix(path, SnapshotFormat::Csv)?;
    check_kind(path, kind.as_deref(), "basis")?;
    let n = phi.ncols();
    if n == 0 || phi.nrows() < n {
        return Err(CliError::usage(format!(
            "basis '{}' must be a tall N x n matrix with n >= 1, got {}x{}",
            path.display(),
            phi.nrows(),
            n
        )));
    }
    let gram = phi.transpose() * &phi;
    let mut max_dev = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            max_dev = max_dev.max((gram[(i, j)] - target).abs());
        }
    }
    if max_dev > BASIS_ORTHO_TOL {
        return Err(CliError::usage(format!(
            "basis '{}' is not orthonormal: max |phi^T phi - I| entry is {max_dev:.3e} \
             (tolerance {BASIS_ORTHO_TOL:.0e})",
            path.display()
        )));
    }
    let mean = match mean_path {
        Some(mp) => {
            let v = load_vector(mp, "mean")?;
            if v.len() != phi.nrows() {
                return Err(CliError::usage(format!(
                    "mean '{}' has {} entries but the basis has {} rows",
                    mp.display(),
                    v.len(),
                    phi.nrows()
                )));
            }
            v
        }
        None => DVector::zeros(phi.nrows()),
    };
    Ok(ModalBasis {
        singular_values: DVector::from_element(n, 1.0),
        n_samples_used: 2,
        mean,
        phi,
    })
}

/// Loads a prior covariance (always CSV): an n×n matrix is taken whole, an
/// n×1 or 1×n matrix is taken as a diagonal of variances.
pub fn load_prior(path: &Path) -> Result<PriorCovariance, CliError> {
    let (m, kind) = load_matrix(path, SnapshotFormat::Csv)?;
    check_kind(path, kind.as_deref(), "prior")?;
    let prior = if m.nrows() == m.ncols() && m.nrows() > 1 {
        PriorCovariance::from_matrix(&m)?
    } else if m.ncols() == 1 {
        PriorCovariance::from_diagonal(&DVector::from_column_slice(m.as_slice()))?
    } else if m.nrows() == 1 {
        PriorCovariance::from_diagonal(&DVector::from_row_slice(m.as_slice()))?
    } else {
        PriorCovariance::from_matrix(&m)?
    };
    Ok(prior)
}

/// Loads a sensor selection (always CSV): a 1×k or k×1 matrix of 0-based
/// location indices, each of which must be integral.
pub fn load_selection(path: &Path, n_locations: usize) -> Result<SensorSelection, CliError> {
    let (m, kind) = load_matrix(path, SnapshotFormat::Csv)?;
    check_kind(path, kind.as_deref(), "selection")?;
    if m.nrows() != 1 && m.ncols() != 1 {
        return Err(CliError::usage(format!(
            "selection '{}' must be a single row or column of indices, got {}x{}",
            path.display(),
            m.nrows(),
            m.ncols()
        )));
    }
    let mut indices = Vec::with_capacity(m.len());
    for &v in m.as_slice() {
        if v.fract() != 0.0 || v < 0.0 || v > usize::MAX as f64 {
            return Err(CliError::usage(format!(
                "selection '{}' holds non-index value {v}",
                path.display()
            )));
        }
        indices.push(v as usize);
    }
    Ok(SensorSelection::new(indices, n_locations)?)
}

/// Loads an N-vector from a CSV matrix file shaped N×1 or 1×N.
pub fn load_vector(path: &Path, expected_kind: &str) -> Result<DVector<f64>, CliError> {
    let (m, kind) = load_matrix(path, SnapshotFormat::Csv)?;
    check_kind(path, kind.as_deref(), expected_kind)?;
    if m.ncols() == 1 {
        Ok(DVector::from_column_slice(m.as_slice()))
    } else if m.nrows() == 1 {
        Ok(DVector::from_row_slice(m.as_slice()))
    } else {
        Err(CliError::usage(format!(
            "'{}' must be a single row or column, got {}x{}",
            path.display(),
            m.nrows(),
            m.ncols()
        )))
    }
}

/// A `kind=` tag in the file header, when present, must match what the
/// command expects; an untagged file is accepted (hand-written inputs).
fn check_kind(path: &Path, found: Option<&str>, expected: &str) -> Result<(), CliError> {
    match found {
        None => Ok(()),
        Some(k) if k == expected => Ok(()),
        Some(k) => Err(CliError::usage(format!(
            "'{}' is tagged kind={k} but this flag expects a {expected} file",
            path.display()
        ))),
    }
}

/// Converts a selection to the 1×k index matrix that `place` writes.
pub fn selection_to_matrix(sel: &SensorSelection) -> DMatrix<f64> {
    DMatrix::from_fn(1, sel.indices().len(), |_, j| sel.indices()[j] as f64)
}
