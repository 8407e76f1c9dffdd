use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::state_space::{ForcePrior, StateSpaceModel};
use crate::error::{GpError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Displacement,
    Velocity,
    Acceleration,
}

/// A measured response quantity at one degree of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationChannel {
    pub quantity: Quantity,
    pub dof: usize,
    /// Measurement noise variance.
    pub noise_var: f64,
}

/// Linear structure `M x'' + C x' + K x = b f(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralModel {
    pub mass: DMatrix<f64>,
    pub damping: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    /// Distribution `b` of the scalar latent force over the DOFs.
    pub force_input: DVector<f64>,
    pub channels: Vec<ObservationChannel>,
}

fn chain_matrix(coeffs: &[f64]) -> DMatrix<f64> {
    let p = coeffs.len();
    let mut m = DMatrix::zeros(p, p);
    for (i, &c) in coeffs.iter().enumerate() {
        m[(i, i)] += c;
        if i > 0 {
            m[(i - 1, i - 1)] += c;
            m[(i - 1, i)] -= c;
            m[(i, i - 1)] -= c;
        }
    }
    m
}

impl StructuralModel {
    /// Lumped-mass chain: element `i` of `dampings`/`stiffnesses` connects
    /// DOF `i - 1` (ground for `i = 0`) to DOF `i`. The force acts at `force_dof`.
    pub fn chain(
        masses: &[f64],
        dampings: &[f64],
        stiffnesses: &[f64],
        force_dof: usize,
        channels: Vec<ObservationChannel>,
    ) -> Result<Self> {
        let p = masses.len();
        if p == 0 {
            return Err(GpError::InvalidConfig("chain needs at least one DOF".into()));
        }
        if dampings.len() != p || stiffnesses.len() != p {
            return Err(GpError::DimensionMismatch {
                expected: p,
                actual: dampings.len().min(stiffnesses.len()),
            });
        }
        if force_dof >= p {
            return Err(GpError::InvalidConfig(format!(
                "force DOF {force_dof} out of range for {p} DOFs"
            )));
        }
        let mut force_input = DVector::zeros(p);
        force_input[force_dof] = 1.0;
        let model = Self {
            mass: DMatrix::from_diagonal(&DVector::from_column_slice(masses)),
            damping: chain_matrix(dampings),
            stiffness: chain_matrix(stiffnesses),
            force_input,
            channels,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn dofs(&self) -> usize {
        self.mass.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.dofs();
        for m in [&self.mass, &self.damping, &self.stiffness] {
            if m.shape() != (p, p) {
                return Err(GpError::DimensionMismatch {
                    expected: p,
                    actual: m.nrows(),
                });
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(GpError::NonFinite("structural matrices"));
            }
        }
        if self.force_input.len() != p {
            return Err(GpError::DimensionMismatch {
                expected: p,
                actual: self.force_input.len(),
            });
        }
        if (&self.mass - self.mass.transpose()).abs().max() > 1e-12 * self.mass.abs().max()
            || self.mass.clone().cholesky().is_none()
        {
            return Err(GpError::Singular("mass matrix must be symmetric positive definite"));
        }
        if (&self.stiffness - self.stiffness.transpose()).abs().max()
            > 1e-12 * self.stiffness.abs().max().max(1.0)
        {
            return Err(GpError::InvalidConfig("stiffness matrix must be symmetric".into()));
        }
        for ch in &self.channels {
            if ch.dof >= p {
                return Err(GpError::InvalidConfig(format!(
                    "observation DOF {} out of range",
                    ch.dof
                )));
            }
            if !(ch.noise_var > 0.0 && ch.noise_var.is_finite()) {
                return Err(GpError::InvalidHyperparameter {
                    name: "observation noise_var",
                    value: ch.noise_var,
                });
            }
        }
        Ok(())
    }
}

/// Joint state-space model of the structure and (optionally) a latent force.
///
/// State layout is `[x; x'; force states]`. The force drives the velocity
/// derivative through `M^-1 b`; acceleration channels read the corresponding
/// row of the drift, which includes that feedthrough. Structural states start
/// at zero mean with variance `initial_structural_var`, the force states at
/// their stationary covariance.
pub fn augment(
    structural: &StructuralModel,
    force: Option<&ForcePrior>,
    initial_structural_var: f64,
) -> Result<StateSpaceModel> {
    structural.validate()?;
    let p = structural.dofs();
    let nf = force.map_or(0, ForcePrior::state_dim);
    let n = 2 * p + nf;

    let mass_inv = structural
        .mass
        .clone()
        .try_inverse()
        .ok_or(GpError::Singular("mass matrix"))?;
    let mut drift = DMatrix::zeros(n, n);
    drift
        .view_mut((0, p), (p, p))
        .copy_from(&DMatrix::identity(p, p));
    drift
        .view_mut((p, 0), (p, p))
        .copy_from(&(-&mass_inv * &structural.stiffness));
    drift
        .view_mut((p, p), (p, p))
        .copy_from(&(-&mass_inv * &structural.damping));

    let mut diffusion = DMatrix::zeros(n, 1);
    let mut spectral_density = DMatrix::zeros(1, 1);
    let mut initial_cov = DMatrix::zeros(n, n);
    for i in 0..2 * p {
        initial_cov[(i, i)] = initial_structural_var;
    }
    let mut force_selector = None;
    if let Some(f) = force {
        let routed = &mass_inv * &structural.force_input;
        // Only the first force state (the force itself) enters the structure.
        drift.view_mut((p, 2 * p), (p, 1)).copy_from(&routed);
        drift.view_mut((2 * p, 2 * p), (nf, nf)).copy_from(&f.drift);
        diffusion.view_mut((2 * p, 0), (nf, 1)).copy_from(&f.diffusion);
        spectral_density[(0, 0)] = f.spectral_density;
        initial_cov
            .view_mut((2 * p, 2 * p), (nf, nf))
            .copy_from(&f.stationary_cov);
        let mut sel = DVector::zeros(n);
        sel[2 * p] = 1.0;
        force_selector = Some(sel);
    }

    let channels = &structural.channels;
    let mut observation = DMatrix::zeros(channels.len(), n);
    let mut observation_noise = DMatrix::zeros(channels.len(), channels.len());
    for (row, ch) in channels.iter().enumerate() {
        match ch.quantity {
            Quantity::Displacement => observation[(row, ch.dof)] = 1.0,
            Quantity::Velocity => observation[(row, p + ch.dof)] = 1.0,
            Quantity::Acceleration => observation.set_row(row, &drift.row(p + ch.dof)),
        }
        observation_noise[(row, row)] = ch.noise_var;
    }

    Ok(StateSpaceModel {
        drift,
        diffusion,
        spectral_density,
        observation,
        observation_noise,
        initial_mean: DVector::zeros(n),
        initial_cov,
        force_selector,
    })
}
