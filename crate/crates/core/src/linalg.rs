//! Dense symmetric-matrix helpers used throughout the crate.
//!
//! Everything here works on small matrices (tens of rows at most), so the
//! routines favour clarity and predictable failure modes over speed.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not symmetric: relative asymmetry {asym:.3e} exceeds {tol:.3e}")]
    NotSymmetric { asym: f64, tol: f64 },
    #[error("matrix is not positive definite (min eigenvalue {min_eig:.3e})")]
    NotPositiveDefinite { min_eig: f64 },
    #[error("matrix is too ill conditioned: cond {cond:.3e} exceeds limit {limit:.3e}")]
    IllConditioned { cond: f64, limit: f64 },
}

/// Relative Frobenius asymmetry `||M - M^T||_F / ||M||_F` (0 for the zero matrix).
pub fn rel_asymmetry(m: &DMatrix<f64>) -> f64 {
    let norm = m.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).norm() / norm
}

/// Symmetric part `(M + M^T) / 2`.
pub fn sym_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Symmetrize `m`, rejecting inputs whose relative asymmetry exceeds `rel_tol`.
pub fn symmetrize_checked(m: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>, LinalgError> {
    let asym = rel_asymmetry(m);
    if asym > rel_tol {
        return Err(LinalgError::NotSymmetric { asym, tol: rel_tol });
    }
    Ok(sym_part(m))
}

/// Eigenvalue range `(min, max)` of a symmetric matrix.
pub fn eig_range(m: &DMatrix<f64>) -> (f64, f64) {
    debug_assert!(m.is_square());
    if m.nrows() == 0 {
        return (0.0, 0.0);
    }
    let eigs = m.clone().symmetric_eigen().eigenvalues;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &e in eigs.iter() {
        lo = lo.min(e);
        hi = hi.max(e);
    }
    (lo, hi)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eig(m: &DMatrix<f64>) -> f64 {
    eig_range(m).0
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eig(m: &DMatrix<f64>) -> f64 {
    eig_range(m).1
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Spectral condition number of a symmetric positive definite matrix.
pub fn cond_sym(m: &DMatrix<f64>) -> f64 {
    let (lo, hi) = eig_range(m);
    if lo <= 0.0 {
        return f64::INFINITY;
    }
    hi / lo
}

/// Inverse of a symmetric positive definite matrix via eigendecomposition.
///
/// Fails when the matrix is not positive definite or its condition number
/// exceeds `cond_limit`. Returns the inverse together with the condition
/// number actually observed.
pub fn sym_inverse(
    m: &DMatrix<f64>,
    cond_limit: f64,
) -> Result<(DMatrix<f64>, f64), LinalgError> {
    let eig = m.clone().symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &e in eig.eigenvalues.iter() {
        lo = lo.min(e);
        hi = hi.max(e);
    }
    if lo <= 0.0 {
        return Err(LinalgError::NotPositiveDefinite { min_eig: lo });
    }
    let cond = hi / lo;
    if cond > cond_limit {
        return Err(LinalgError::IllConditioned { cond, limit: cond_limit });
    }
    let u = &eig.eigenvectors;
    let inv_d = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| 1.0 / e));
    Ok((u * inv_d * u.transpose(), cond))
}

/// Symmetric square root of a symmetric positive definite matrix.
pub fn sym_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let eig = m.clone().symmetric_eigen();
    let lo = eig.eigenvalues.min();
    if lo <= 0.0 {
        return Err(LinalgError::NotPositiveDefinite { min_eig: lo });
    }
    let u = &eig.eigenvectors;
    let sqrt_d = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    Ok(u * sqrt_d * u.transpose())
}

/// Solve `W y = x` for symmetric positive definite `W` (Cholesky).
pub fn spd_solve(w: &DMatrix<f64>, x: &DVector<f64>) -> Option<DVector<f64>> {
    nalgebra::linalg::Cholesky::new(w.clone()).map(|c| c.solve(x))
}
