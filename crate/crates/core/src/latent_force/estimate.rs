use nalgebra::DMatrix;

use super::filter::{kalman_filter, rts_smoother, SmootherResult};
use super::state_space::{discretize, matern_to_ss, ForcePrior, MaternOrder};
use super::structural::{augment, StructuralModel};
use crate::error::{GpError, Result};
use crate::optimize::{pso_minimize, PsoConfig, PsoResult};

/// Joint input-state estimate of the latent force acting on `structural`,
/// sampled every `dt` seconds. Rows of `observations` follow the structure's
/// observation channels; non-finite entries are treated as missing.
pub fn estimate_force(
    structural: &StructuralModel,
    observations: &DMatrix<f64>,
    force: &ForcePrior,
    dt: f64,
    initial_structural_var: f64,
) -> Result<SmootherResult> {
    let model = augment(structural, Some(force), initial_structural_var)?;
    let discrete = discretize(&model, dt)?;
    let filtered = kalman_filter(&discrete, observations)?;
    rts_smoother(&discrete, &filtered)
}

fn filter_log_likelihood(
    structural: &StructuralModel,
    observations: &DMatrix<f64>,
    force: &ForcePrior,
    dt: f64,
    initial_structural_var: f64,
) -> Result<f64> {
    let model = augment(structural, Some(force), initial_structural_var)?;
    let discrete = discretize(&model, dt)?;
    Ok(kalman_filter(&discrete, observations)?.log_likelihood)
}

#[derive(Debug, Clone)]
pub struct ForceFit {
    pub prior: ForcePrior,
    /// Observation noise variance, when it was part of the search.
    pub noise_var: Option<f64>,
    pub search: PsoResult,
}

/// Choose the force prior's `(sigma, lengthscale)` by maximizing the filter
/// log-likelihood with particle swarm search. A third bound, when present,
/// searches a common observation noise variance for all channels.
pub fn optimize_force_prior(
    structural: &StructuralModel,
    observations: &DMatrix<f64>,
    order: MaternOrder,
    dt: f64,
    initial_structural_var: f64,
    pso: &PsoConfig,
) -> Result<ForceFit> {
    let with_noise = match pso.bounds.len() {
        2 => false,
        3 => true,
        n => {
            return Err(GpError::InvalidConfig(format!(
                "force prior search takes 2 or 3 bounds, got {n}"
            )))
        }
    };
    let candidate = |params: &[f64]| -> Result<(StructuralModel, ForcePrior)> {
        let mut s = structural.clone();
        if with_noise {
            for ch in &mut s.channels {
                ch.noise_var = params[2];
            }
        }
        Ok((s, matern_to_ss(order, params[0], params[1])?))
    };
    let objective = |params: &[f64]| {
        candidate(params)
            .and_then(|(s, f)| filter_log_likelihood(&s, observations, &f, dt, initial_structural_var))
            .map_or(f64::INFINITY, |ll| -ll)
    };
    let search = pso_minimize(objective, pso)?;
    let (_, prior) = candidate(&search.best_params)?;
    Ok(ForceFit {
        prior,
        noise_var: with_noise.then(|| search.best_params[2]),
        search,
    })
}
