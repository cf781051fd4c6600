//! Symmetric positive-semidefinite matrix functions.

use nalgebra::{DMatrix, SymmetricEigen};

use super::FidError;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// Relative asymmetry tolerance accepted by [`sqrtm_psd`].
pub const SYMMETRY_TOL: f64 = 1e-9;

fn check_symmetric(m: &DMatrix<f64>) -> Result<(), FidError> {
    if !m.is_square() {
        return Err(FidError::NotSquare(m.nrows(), m.ncols()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(FidError::NonFinite("matrix"));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let gap = (m[(i, j)] - m[(j, i)]).abs();
            if gap > SYMMETRY_TOL * scale {
                return Err(FidError::Asymmetric { i, j, gap });
            }
        }
    }
    Ok(())
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub(crate) fn eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>, FidError> {
    SymmetricEigen::try_new(m.clone(), EIGEN_EPS, EIGEN_MAX_ITER)
        .filter(|e| e.eigenvalues.iter().all(|v| v.is_finite()))
        .ok_or(FidError::NonFinite("eigendecomposition"))
}

/// Principal square root of a symmetric PSD matrix.
///
/// Eigenvalues below zero (round-off on rank-deficient input) are clamped to 0
/// before reconstruction, so the result is always symmetric PSD.
pub fn sqrtm_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>, FidError> {
    check_symmetric(m)?;
    let eig = eigen(&symmetrize(m))?;
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * roots[j]);
    Ok(symmetrize(&(scaled * v.transpose())))
}

/// `Tr(M^{1/2})` of a symmetric PSD matrix, from its clamped eigenvalues.
pub(crate) fn trace_sqrt_psd(m: &DMatrix<f64>) -> Result<f64, FidError> {
    check_symmetric(m)?;
    let eig = eigen(&symmetrize(m))?;
    Ok(eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum())
}
