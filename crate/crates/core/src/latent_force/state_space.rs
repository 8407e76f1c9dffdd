use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GpError, Result};
use crate::kernel::KernelSpec;
use crate::linalg::symmetrize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaternOrder {
    /// nu = 1/2
    Half,
    /// nu = 3/2
    ThreeHalves,
}

/// Continuous-time linear Gaussian model
/// `dx = A x dt + L dB`, `E[dB dB^T] = Qc dt`, `y_k = H x(t_k) + r_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    pub drift: DMatrix<f64>,
    pub diffusion: DMatrix<f64>,
    pub spectral_density: DMatrix<f64>,
    pub observation: DMatrix<f64>,
    pub observation_noise: DMatrix<f64>,
    pub initial_mean: DVector<f64>,
    pub initial_cov: DMatrix<f64>,
    /// Row extracting the latent force from the state, if there is one.
    pub force_selector: Option<DVector<f64>>,
}

impl StateSpaceModel {
    pub fn state_dim(&self) -> usize {
        self.drift.nrows()
    }

    pub fn observation_dim(&self) -> usize {
        self.observation.nrows()
    }
}

/// Discrete-time counterpart with step `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    pub dt: f64,
    pub transition: DMatrix<f64>,
    pub process_noise: DMatrix<f64>,
    pub observation: DMatrix<f64>,
    pub observation_noise: DMatrix<f64>,
    pub initial_mean: DVector<f64>,
    pub initial_cov: DMatrix<f64>,
    pub force_selector: Option<DVector<f64>>,
}

/// State-space form of a Matérn force prior.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcePrior {
    pub order: MaternOrder,
    pub sigma: f64,
    pub lengthscale: f64,
    pub drift: DMatrix<f64>,
    pub diffusion: DVector<f64>,
    /// Scalar white-noise spectral density `q`.
    pub spectral_density: f64,
    pub stationary_cov: DMatrix<f64>,
}

impl ForcePrior {
    pub fn state_dim(&self) -> usize {
        self.drift.nrows()
    }

    /// The equivalent covariance function.
    pub fn kernel(&self) -> KernelSpec {
        match self.order {
            MaternOrder::Half => KernelSpec::Matern12 {
                sigma_f: self.sigma,
                lengthscale: self.lengthscale,
            },
            MaternOrder::ThreeHalves => KernelSpec::Matern32 {
                sigma_f: self.sigma,
                lengthscale: self.lengthscale,
            },
        }
    }

    /// The GP observed directly with additive noise of variance `noise_var`.
    pub fn direct_observation(&self, noise_var: f64) -> StateSpaceModel {
        let n = self.state_dim();
        let mut h = DMatrix::zeros(1, n);
        h[(0, 0)] = 1.0;
        let mut selector = DVector::zeros(n);
        selector[0] = 1.0;
        StateSpaceModel {
            drift: self.drift.clone(),
            diffusion: DMatrix::from_column_slice(n, 1, self.diffusion.as_slice()),
            spectral_density: DMatrix::from_element(1, 1, self.spectral_density),
            observation: h,
            observation_noise: DMatrix::from_element(1, 1, noise_var),
            initial_mean: DVector::zeros(n),
            initial_cov: self.stationary_cov.clone(),
            force_selector: Some(selector),
        }
    }
}

/// Companion-form SDE of a Matérn process with variance `sigma^2` and
/// lengthscale `lengthscale`.
pub fn matern_to_ss(order: MaternOrder, sigma: f64, lengthscale: f64) -> Result<ForcePrior> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(GpError::InvalidHyperparameter {
            name: "sigma",
            value: sigma,
        });
    }
    if !(lengthscale > 0.0 && lengthscale.is_finite()) {
        return Err(GpError::InvalidHyperparameter {
            name: "lengthscale",
            value: lengthscale,
        });
    }
    let s2 = sigma * sigma;
    let (drift, diffusion, q) = match order {
        MaternOrder::Half => {
            let lambda = 1.0 / lengthscale;
            (
                DMatrix::from_element(1, 1, -lambda),
                DVector::from_element(1, 1.0),
                2.0 * s2 * lambda,
            )
        }
        MaternOrder::ThreeHalves => {
            let lambda = 3f64.sqrt() / lengthscale;
            (
                DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -lambda * lambda, -2.0 * lambda]),
                DVector::from_column_slice(&[0.0, 1.0]),
                4.0 * s2 * lambda.powi(3),
            )
        }
    };
    let noise = &diffusion * diffusion.transpose() * q;
    let stationary_cov = solve_lyapunov(&drift, &noise)?;
    Ok(ForcePrior {
        order,
        sigma,
        lengthscale,
        drift,
        diffusion,
        spectral_density: q,
        stationary_cov,
    })
}

/// Solve `A P + P A^T + Q = 0` for `P` by vectorization.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || q.shape() != (n, n) {
        return Err(GpError::DimensionMismatch {
            expected: n,
            actual: q.nrows(),
        });
    }
    let eye = DMatrix::<f64>::identity(n, n);
    // Column-major vec: vec(A P) = (I kron A) vec(P), vec(P A^T) = (A kron I) vec(P).
    let system = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = -DVector::from_column_slice(q.as_slice());
    let sol = system
        .lu()
        .solve(&rhs)
        .ok_or(GpError::Singular("Lyapunov system"))?;
    let mut p = DMatrix::from_column_slice(n, n, sol.as_slice());
    symmetrize(&mut p);
    Ok(p)
}

/// Exact discretization by the Van Loan block exponential:
/// `A_d = exp(A dt)`, `Q_d = int_0^dt exp(A s) L Qc L^T exp(A^T s) ds`.
pub fn discretize(model: &StateSpaceModel, dt: f64) -> Result<DiscreteModel> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(GpError::InvalidHyperparameter {
            name: "dt",
            value: dt,
        });
    }
    let finite = |m: &DMatrix<f64>| m.iter().all(|v| v.is_finite());
    if !finite(&model.drift) || !finite(&model.diffusion) || !finite(&model.spectral_density) {
        return Err(GpError::NonFinite("state-space model"));
    }
    let n = model.state_dim();
    let noise = &model.diffusion * &model.spectral_density * model.diffusion.transpose();
    let mut block = DMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&(-&model.drift * dt));
    block.view_mut((0, n), (n, n)).copy_from(&(&noise * dt));
    block
        .view_mut((n, n), (n, n))
        .copy_from(&(model.drift.transpose() * dt));
    let exp = block.exp();
    let transition = exp.view((n, n), (n, n)).transpose();
    let mut process_noise = &transition * exp.view((0, n), (n, n));
    symmetrize(&mut process_noise);
    if !finite(&transition) || !finite(&process_noise) {
        return Err(GpError::NonFinite("discretized model"));
    }
    Ok(DiscreteModel {
        dt,
        transition,
        process_noise,
        observation: model.observation.clone(),
        observation_noise: model.observation_noise.clone(),
        initial_mean: model.initial_mean.clone(),
        initial_cov: model.initial_cov.clone(),
        force_selector: model.force_selector.clone(),
    })
}
