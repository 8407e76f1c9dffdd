//! Exact Gaussian process regression.
//!
//! A non-zero prior mean `m` is handled by regressing on the residuals
//! `y - m(X)` and adding `m(X*)` back at prediction time.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{GpError, Result};
use crate::kernel::{build_gram, build_gram_symmetric, rows, Covariance, KernelSpec};
use crate::linalg::cholesky_with_jitter;
use crate::mean::MeanFunctionSpec;

/// Inputs `X` (n x d), outputs `y` (n) and optional timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    timestamps: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(GpError::DimensionMismatch {
                expected: x.nrows(),
                actual: y.len(),
            });
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(GpError::NonFinite("dataset"));
        }
        Ok(Self {
            x,
            y,
            timestamps: None,
        })
    }

    /// Single-input dataset, e.g. a time series indexed by `t`.
    pub fn from_columns(t: &[f64], y: &[f64]) -> Result<Self> {
        Self::new(
            DMatrix::from_column_slice(t.len(), 1, t),
            DVector::from_column_slice(y),
        )
    }

    pub fn with_timestamps(mut self, timestamps: Vec<f64>) -> Result<Self> {
        if timestamps.len() != self.len() {
            return Err(GpError::DimensionMismatch {
                expected: self.len(),
                actual: timestamps.len(),
            });
        }
        if timestamps.iter().any(|v| !v.is_finite()) {
            return Err(GpError::NonFinite("timestamps"));
        }
        self.timestamps = Some(timestamps);
        Ok(self)
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn timestamps(&self) -> Option<&[f64]> {
        self.timestamps.as_deref()
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Rows selected by index, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let x = self.x.select_rows(indices);
        let y = DVector::from_iterator(indices.len(), indices.iter().map(|&i| self.y[i]));
        let timestamps = self
            .timestamps
            .as_ref()
            .map(|t| indices.iter().map(|&i| t[i]).collect());
        Dataset { x, y, timestamps }
    }
}

/// Posterior mean, pointwise variance and optionally the full covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mean: DVector<f64>,
    pub variance: DVector<f64>,
    pub covariance: Option<DMatrix<f64>>,
}

/// A GP conditioned on training data.
#[derive(Debug, Clone)]
pub struct TrainedGp<K = KernelSpec> {
    kernel: K,
    mean: MeanFunctionSpec,
    noise_var: f64,
    jitter: f64,
    data: Dataset,
    residual: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    log_marginal_likelihood: f64,
}

/// Condition a GP prior on `data`.
pub fn fit_exact<K: Covariance>(
    data: &Dataset,
    kernel: K,
    mean: MeanFunctionSpec,
    noise_var: f64,
) -> Result<TrainedGp<K>> {
    if data.is_empty() {
        return Err(GpError::EmptyData);
    }
    if !(noise_var >= 0.0 && noise_var.is_finite()) {
        return Err(GpError::InvalidHyperparameter {
            name: "noise_var",
            value: noise_var,
        });
    }
    let residual = mean_residual(&mean, data)?;
    let mut k = build_gram_symmetric(&kernel, data.x())?;
    for i in 0..k.nrows() {
        k[(i, i)] += noise_var;
    }
    let (chol, jitter) = cholesky_with_jitter(&k)?;
    let alpha = chol.solve(&residual);
    let log_marginal_likelihood = lml_from_parts(&chol, &residual, &alpha);
    Ok(TrainedGp {
        kernel,
        mean,
        noise_var,
        jitter,
        data: data.clone(),
        residual,
        chol,
        alpha,
        log_marginal_likelihood,
    })
}

fn mean_residual(mean: &MeanFunctionSpec, data: &Dataset) -> Result<DVector<f64>> {
    if mean.is_zero() {
        return Ok(data.y().clone());
    }
    let m = eval_mean(mean, data.x())?;
    Ok(data.y() - m)
}

fn eval_mean(mean: &MeanFunctionSpec, x: &DMatrix<f64>) -> Result<DVector<f64>> {
    let values = rows(x)
        .iter()
        .map(|r| mean.eval(r))
        .collect::<Result<Vec<_>>>()?;
    Ok(DVector::from_vec(values))
}

fn lml_from_parts(chol: &Cholesky<f64, Dyn>, residual: &DVector<f64>, alpha: &DVector<f64>) -> f64 {
    let n = residual.len() as f64;
    let log_det_half: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum();
    -0.5 * residual.dot(alpha) - log_det_half - 0.5 * n * (2.0 * PI).ln()
}

impl<K: Covariance> TrainedGp<K> {
    pub fn kernel(&self) -> &K {
        &self.kernel
    }

    pub fn mean_function(&self) -> &MeanFunctionSpec {
        &self.mean
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Diagonal jitter that was needed for the factorization (0 if none).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// `y - m(X)`
    pub fn residual(&self) -> &DVector<f64> {
        &self.residual
    }

    /// Lower-triangular factor of `K + (noise_var + jitter) I`.
    pub fn factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// `(K + noise_var I)^-1 (y - m(X))`
    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.log_marginal_likelihood
    }

    /// Posterior mean and variance of the latent function at the rows of `x_star`.
    pub fn predict(&self, x_star: &DMatrix<f64>) -> Result<Prediction> {
        self.predict_inner(x_star, false)
    }

    /// Posterior mean only; avoids the triangular solve needed for variances.
    pub fn predict_mean(&self, x_star: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x_star.ncols() != self.data.dim() {
            return Err(GpError::DimensionMismatch {
                expected: self.data.dim(),
                actual: x_star.ncols(),
            });
        }
        let k_cross = build_gram(&self.kernel, self.data.x(), x_star)?;
        let mut mean = k_cross.tr_mul(&self.alpha);
        if !self.mean.is_zero() {
            mean += eval_mean(&self.mean, x_star)?;
        }
        Ok(mean)
    }

    /// As [`TrainedGp::predict`], also returning the full posterior covariance.
    pub fn predict_full(&self, x_star: &DMatrix<f64>) -> Result<Prediction> {
        self.predict_inner(x_star, true)
    }

    fn predict_inner(&self, x_star: &DMatrix<f64>, full: bool) -> Result<Prediction> {
        if x_star.ncols() != self.data.dim() {
            return Err(GpError::DimensionMismatch {
                expected: self.data.dim(),
                actual: x_star.ncols(),
            });
        }
        let k_cross = build_gram(&self.kernel, self.data.x(), x_star)?;
        let mut mean = k_cross.tr_mul(&self.alpha);
        if !self.mean.is_zero() {
            mean += eval_mean(&self.mean, x_star)?;
        }
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&k_cross)
            .ok_or(GpError::Singular("training covariance factor"))?;

        let (variance, covariance) = if full {
            let mut cov = build_gram(&self.kernel, x_star, x_star)? - v.tr_mul(&v);
            crate::linalg::symmetrize(&mut cov);
            let var = DVector::from_iterator(cov.nrows(), cov.diagonal().iter().map(|&s| s.max(0.0)));
            (var, Some(cov))
        } else {
            let star_rows = rows(x_star);
            let mut var = DVector::zeros(star_rows.len());
            for (j, r) in star_rows.iter().enumerate() {
                let prior = self.kernel.eval(r, r)?;
                var[j] = (prior - v.column(j).norm_squared()).max(0.0);
            }
            (var, None)
        };
        Ok(Prediction {
            mean,
            variance,
            covariance,
        })
    }
}

/// Log marginal likelihood `-1/2 r^T K^-1 r - 1/2 log|K| - n/2 log 2 pi` of a
/// fitted model, with `K` the noisy training covariance and `r = y - m(X)`.
pub fn log_marginal_likelihood<K: Covariance>(model: &TrainedGp<K>) -> f64 {
    lml_from_parts(&model.chol, &model.residual, &model.alpha)
}
