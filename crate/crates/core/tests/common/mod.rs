//! Independent reference computations used as test oracles. None of these go
//! through the Cholesky-based code paths of the library.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

/// Posterior of `f*` given `y ~ N(0, K + noise I)` by explicitly inverting the
/// training block of the joint covariance with LU.
pub fn condition_joint(
    k_train: &DMatrix<f64>,
    k_cross: &DMatrix<f64>,
    k_test: &DMatrix<f64>,
    noise: f64,
    y: &DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let n = k_train.nrows();
    let m = k_test.nrows();
    let mut joint = DMatrix::zeros(n + m, n + m);
    joint.view_mut((0, 0), (n, n)).copy_from(k_train);
    for i in 0..n {
        joint[(i, i)] += noise;
    }
    joint.view_mut((0, n), (n, m)).copy_from(k_cross);
    joint.view_mut((n, 0), (m, n)).copy_from(&k_cross.transpose());
    joint.view_mut((n, n), (m, m)).copy_from(k_test);

    let a = joint.view((0, 0), (n, n)).into_owned();
    let b = joint.view((0, n), (n, m)).into_owned();
    let c = joint.view((n, n), (m, m)).into_owned();
    let a_inv = a.lu().try_inverse().expect("invertible");
    let mean = b.transpose() * &a_inv * y;
    let cov = c - b.transpose() * &a_inv * &b;
    (mean, cov)
}

/// Multivariate normal log-density using an LU determinant and inverse.
pub fn mvn_logpdf(y: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let n = y.len() as f64;
    let lu = cov.clone().lu();
    let det = lu.determinant();
    let inv = lu.try_inverse().expect("invertible");
    -0.5 * (y.transpose() * inv * y)[(0, 0)] - 0.5 * det.ln() - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

/// Composite Simpson rule on `[a, b]` with an even number of intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

pub fn nmse(y: &[f64], f: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    100.0 / (n * var) * y.iter().zip(f).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / scale)
        .fold(0.0, f64::max)
}
