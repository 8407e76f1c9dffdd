use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{GpError, Result};

pub(crate) const JITTER_START: f64 = 1e-10;
pub(crate) const JITTER_MAX: f64 = 1e-4;

/// Cholesky factorization that escalates diagonal jitter on failure.
///
/// The plain matrix is tried first; after that the jitter runs from
/// `1e-10 * mean(diag)` up to `1e-4 * mean(diag)` in decades. Returns the
/// factor and the jitter that was added.
pub(crate) fn cholesky_with_jitter(mat: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if mat.iter().any(|v| !v.is_finite()) {
        return Err(GpError::NonFinite("covariance matrix"));
    }
    if let Some(chol) = mat.clone().cholesky() {
        return Ok((chol, 0.0));
    }
    let n = mat.nrows().max(1);
    let mean_diag = mat.diagonal().iter().sum::<f64>() / n as f64;
    let scale = if mean_diag > 0.0 { mean_diag } else { 1.0 };
    let mut rel = JITTER_START;
    while rel <= JITTER_MAX * (1.0 + 1e-9) {
        let jitter = rel * scale;
        let mut m = mat.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = m.cholesky() {
            return Ok((chol, jitter));
        }
        rel *= 10.0;
    }
    Err(GpError::Factorization {
        jitter: JITTER_MAX * scale,
    })
}

/// Replace `m` by `(m + m^T) / 2`.
pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}
