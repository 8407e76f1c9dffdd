use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

use super::state_space::DiscreteModel;
use crate::error::{GpError, Result};
use crate::linalg::{cholesky_with_jitter, symmetrize};

/// Kalman filter output. `predicted_*[k]` is the prior at step `k` before the
/// update with observation `k`; at `k = 0` it is the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    pub predicted_means: Vec<DVector<f64>>,
    pub predicted_covs: Vec<DMatrix<f64>>,
    pub filtered_means: Vec<DVector<f64>>,
    pub filtered_covs: Vec<DMatrix<f64>>,
    pub log_likelihood: f64,
}

impl FilterResult {
    pub fn len(&self) -> usize {
        self.filtered_means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filtered_means.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmootherResult {
    pub filtered_means: Vec<DVector<f64>>,
    pub filtered_covs: Vec<DMatrix<f64>>,
    pub smoothed_means: Vec<DVector<f64>>,
    pub smoothed_covs: Vec<DMatrix<f64>>,
    /// Posterior mean of the latent force per step (empty without a force state).
    pub force_mean: Vec<f64>,
    pub force_variance: Vec<f64>,
    pub log_likelihood: f64,
}

/// Run the Kalman filter over `observations` (T x obs). Non-finite entries
/// mark missing measurements; the update uses only the channels present.
/// Covariance updates use the Joseph form.
pub fn kalman_filter(model: &DiscreteModel, observations: &DMatrix<f64>) -> Result<FilterResult> {
    let n = model.transition.nrows();
    let obs_dim = model.observation.nrows();
    if observations.ncols() != obs_dim {
        return Err(GpError::DimensionMismatch {
            expected: obs_dim,
            actual: observations.ncols(),
        });
    }
    let steps = observations.nrows();
    let mut out = FilterResult {
        predicted_means: Vec::with_capacity(steps),
        predicted_covs: Vec::with_capacity(steps),
        filtered_means: Vec::with_capacity(steps),
        filtered_covs: Vec::with_capacity(steps),
        log_likelihood: 0.0,
    };
    let eye = DMatrix::<f64>::identity(n, n);
    let mut mean = model.initial_mean.clone();
    let mut cov = model.initial_cov.clone();

    for k in 0..steps {
        if k > 0 {
            mean = &model.transition * &mean;
            cov = &model.transition * &cov * model.transition.transpose() + &model.process_noise;
            symmetrize(&mut cov);
        }
        out.predicted_means.push(mean.clone());
        out.predicted_covs.push(cov.clone());

        let present: Vec<usize> = (0..obs_dim)
            .filter(|&j| observations[(k, j)].is_finite())
            .collect();
        if !present.is_empty() {
            let h = model.observation.select_rows(&present);
            let r = model
                .observation_noise
                .select_rows(&present)
                .select_columns(&present);
            let y = DVector::from_iterator(present.len(), present.iter().map(|&j| observations[(k, j)]));

            let innovation = y - &h * &mean;
            let mut s = &h * &cov * h.transpose() + &r;
            symmetrize(&mut s);
            let chol = s
                .clone()
                .cholesky()
                .ok_or(GpError::InnovationNotPositiveDefinite(k))?;
            // K = P H^T S^-1, computed as (S^-1 H P)^T.
            let gain = chol.solve(&(&h * &cov)).transpose();
            let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            let whitened = chol.solve(&innovation);
            out.log_likelihood += -0.5
                * (innovation.dot(&whitened) + log_det + present.len() as f64 * (2.0 * PI).ln());

            mean += &gain * &innovation;
            let a = &eye - &gain * &h;
            cov = &a * &cov * a.transpose() + &gain * &r * gain.transpose();
            symmetrize(&mut cov);
        }
        out.filtered_means.push(mean.clone());
        out.filtered_covs.push(cov.clone());
    }
    Ok(out)
}

/// Rauch–Tung–Striebel backward pass.
pub fn rts_smoother(model: &DiscreteModel, filtered: &FilterResult) -> Result<SmootherResult> {
    let steps = filtered.len();
    let mut smoothed_means = filtered.filtered_means.clone();
    let mut smoothed_covs = filtered.filtered_covs.clone();
    for k in (0..steps.saturating_sub(1)).rev() {
        let next_pred_cov = &filtered.predicted_covs[k + 1];
        let (chol, _) = cholesky_with_jitter(next_pred_cov)
            .map_err(|_| GpError::SingularPredictedCovariance(k + 1))?;
        // G = P_k A^T P_pred^-1, computed as (P_pred^-1 A P_k)^T.
        let gain = chol
            .solve(&(&model.transition * &filtered.filtered_covs[k]))
            .transpose();
        let mean = &filtered.filtered_means[k]
            + &gain * (&smoothed_means[k + 1] - &filtered.predicted_means[k + 1]);
        let mut cov = &filtered.filtered_covs[k]
            + &gain * (&smoothed_covs[k + 1] - next_pred_cov) * gain.transpose();
        symmetrize(&mut cov);
        smoothed_means[k] = mean;
        smoothed_covs[k] = cov;
    }

    let (force_mean, force_variance) = match &model.force_selector {
        Some(f) => (
            smoothed_means.iter().map(|m| f.dot(m)).collect(),
            smoothed_covs
                .iter()
                .map(|p| (f.transpose() * p * f)[(0, 0)].max(0.0))
                .collect(),
        ),
        None => (Vec::new(), Vec::new()),
    };
    Ok(SmootherResult {
        filtered_means: filtered.filtered_means.clone(),
        filtered_covs: filtered.filtered_covs.clone(),
        smoothed_means,
        smoothed_covs,
        force_mean,
        force_variance,
        log_likelihood: filtered.log_likelihood,
    })
}
