//! Boundary-constrained reduced-rank GP regression.
//!
//! A stationary kernel is approximated on the box `prod_k [-L_k, L_k]` by
//! `k(x, x') ~ sum_j S(sqrt(lambda_j)) phi_j(x) phi_j(x')`, where `phi_j`,
//! `lambda_j` are eigenpairs of the negative Laplacian with Dirichlet or
//! Neumann boundary conditions and `S` is the kernel's spectral density.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{GpError, Result};
use crate::gp::Dataset;
use crate::kernel::{Covariance, KernelSpec};
use crate::linalg::cholesky_with_jitter;
use crate::physics::spectral_density_nd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Functions vanish on the boundary.
    Dirichlet,
    /// Normal derivatives vanish on the boundary.
    Neumann,
}

/// Hyper-rectangular domain `prod_k [-L_k, L_k]` with a basis budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub half_widths: Vec<f64>,
    pub boundary: Boundary,
    /// Basis functions per dimension.
    pub basis_counts: Vec<usize>,
    /// Optional cap on the total basis size; the lowest eigenvalues are kept.
    #[serde(default)]
    pub max_basis: Option<usize>,
}

impl DomainSpec {
    pub fn new(half_widths: Vec<f64>, boundary: Boundary, basis_counts: Vec<usize>) -> Self {
        Self {
            half_widths,
            boundary,
            basis_counts,
            max_basis: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.half_widths.len()
    }

    fn validate(&self) -> Result<()> {
        if self.half_widths.is_empty() {
            return Err(GpError::InvalidConfig("domain has no dimensions".into()));
        }
        if self.basis_counts.len() != self.half_widths.len() {
            return Err(GpError::DimensionMismatch {
                expected: self.half_widths.len(),
                actual: self.basis_counts.len(),
            });
        }
        for &l in &self.half_widths {
            if !(l > 0.0 && l.is_finite()) {
                return Err(GpError::InvalidHyperparameter {
                    name: "half_width",
                    value: l,
                });
            }
        }
        if self.basis_counts.iter().any(|&m| m < 1) || self.max_basis == Some(0) {
            return Err(GpError::InvalidConfig(
                "basis counts must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn contains(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(GpError::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        if x
            .iter()
            .zip(&self.half_widths)
            .any(|(v, l)| !(v.abs() <= *l))
        {
            return Err(GpError::OutsideDomain(x.to_vec()));
        }
        Ok(())
    }

    fn first_index(&self) -> usize {
        match self.boundary {
            Boundary::Dirichlet => 1,
            Boundary::Neumann => 0,
        }
    }
}

/// One tensor-product eigenfunction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    /// Per-dimension index `j_k` (Dirichlet from 1, Neumann from 0).
    pub indices: Vec<usize>,
    pub eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedRankBasis {
    domain: DomainSpec,
    modes: Vec<Mode>,
    weights: Option<Vec<f64>>,
}

fn frequency(j: usize, half_width: f64) -> f64 {
    PI * j as f64 / (2.0 * half_width)
}

/// Laplacian eigenpairs of the domain, sorted by ascending eigenvalue.
pub fn eigenpairs(domain: &DomainSpec) -> Result<ReducedRankBasis> {
    domain.validate()?;
    let first = domain.first_index();
    let mut modes = vec![Mode {
        indices: vec![],
        eigenvalue: 0.0,
    }];
    for (k, &count) in domain.basis_counts.iter().enumerate() {
        let l = domain.half_widths[k];
        modes = modes
            .into_iter()
            .flat_map(|m| {
                (first..first + count).map(move |j| {
                    let mut indices = m.indices.clone();
                    indices.push(j);
                    Mode {
                        indices,
                        eigenvalue: m.eigenvalue + frequency(j, l).powi(2),
                    }
                })
            })
            .collect();
    }
    modes.sort_by(|a, b| {
        a.eigenvalue
            .total_cmp(&b.eigenvalue)
            .then_with(|| a.indices.cmp(&b.indices))
    });
    if let Some(cap) = domain.max_basis {
        modes.truncate(cap);
    }
    Ok(ReducedRankBasis {
        domain: domain.clone(),
        modes,
        weights: None,
    })
}

impl ReducedRankBasis {
    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Spectral weights `S(sqrt(lambda_j))`, if bound to a kernel.
    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// Bind the spectral density of `spec`, evaluated at each mode's
    /// per-dimension frequencies.
    pub fn with_kernel(mut self, spec: &KernelSpec) -> Result<Self> {
        let weights = self
            .modes
            .iter()
            .map(|m| {
                let omega: Vec<f64> = m
                    .indices
                    .iter()
                    .zip(&self.domain.half_widths)
                    .map(|(&j, &l)| frequency(j, l))
                    .collect();
                spectral_density_nd(spec, &omega)
            })
            .collect::<Result<Vec<_>>>()?;
        self.weights = Some(weights);
        Ok(self)
    }

    fn eval_1d(&self, j: usize, k: usize, x: f64) -> f64 {
        let l = self.domain.half_widths[k];
        let arg = frequency(j, l) * (x + l);
        match self.domain.boundary {
            Boundary::Dirichlet => {
                if x.abs() == l {
                    0.0
                } else {
                    arg.sin() / l.sqrt()
                }
            }
            Boundary::Neumann if j == 0 => 1.0 / (2.0 * l).sqrt(),
            Boundary::Neumann => arg.cos() / l.sqrt(),
        }
    }

    /// Eigenfunction `phi_j(x)`.
    pub fn eigenfunction(&self, j: usize, x: &[f64]) -> Result<f64> {
        self.domain.contains(x)?;
        Ok(self.eval_mode(&self.modes[j], x))
    }

    fn eval_mode(&self, mode: &Mode, x: &[f64]) -> f64 {
        mode.indices
            .iter()
            .enumerate()
            .map(|(k, &j)| self.eval_1d(j, k, x[k]))
            .product()
    }

    /// All eigenfunctions at `x`.
    pub fn features(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.domain.contains(x)?;
        Ok(DVector::from_iterator(
            self.modes.len(),
            self.modes.iter().map(|m| self.eval_mode(m, x)),
        ))
    }

    /// Feature matrix `Phi` (n x M) for the rows of `x`.
    pub fn feature_matrix(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut phi = DMatrix::zeros(x.nrows(), self.modes.len());
        for (i, row) in x.row_iter().enumerate() {
            let r: Vec<f64> = row.iter().copied().collect();
            phi.set_row(i, &self.features(&r)?.transpose());
        }
        Ok(phi)
    }

    fn bound_weights(&self) -> Result<&[f64]> {
        self.weights
            .as_deref()
            .ok_or_else(|| GpError::InvalidConfig("basis has no spectral weights".into()))
    }
}

/// The reduced-rank approximation of a kernel, usable anywhere a
/// [`Covariance`] is accepted.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedRankKernel {
    basis: ReducedRankBasis,
}

impl ReducedRankKernel {
    pub fn new(basis: ReducedRankBasis, spec: &KernelSpec) -> Result<Self> {
        Ok(Self {
            basis: basis.with_kernel(spec)?,
        })
    }
}

impl Covariance for ReducedRankKernel {
    fn input_dim(&self) -> Option<usize> {
        Some(self.basis.domain.dim())
    }

    fn eval(&self, x: &[f64], x_prime: &[f64]) -> Result<f64> {
        let w = self.basis.bound_weights()?;
        let (a, b) = (self.basis.features(x)?, self.basis.features(x_prime)?);
        Ok(a.iter().zip(b.iter()).zip(w).map(|((p, q), s)| s * p * q).sum())
    }
}

/// `sum_j S(sqrt(lambda_j)) phi_j(x) phi_j(x')` for the kernel `spec`.
pub fn approx_kernel(
    basis: &ReducedRankBasis,
    spec: &KernelSpec,
    x: &[f64],
    x_prime: &[f64],
) -> Result<f64> {
    ReducedRankKernel::new(basis.clone(), spec)?.eval(x, x_prime)
}

/// Reduced-rank GP posterior held in coefficient space.
#[derive(Debug, Clone)]
pub struct ReducedRankGp {
    basis: ReducedRankBasis,
    kernel: KernelSpec,
    noise_var: f64,
    jitter: f64,
    weight_mean: DVector<f64>,
    weight_cov: DMatrix<f64>,
}

/// Fit in weight space. With `w = diag(sqrt(S)) v` and `v ~ N(0, I)` the
/// posterior of `v` needs only the M x M system `Phi_s^T Phi_s + noise I`,
/// which stays well conditioned when `S` spans many decades.
pub fn fit_reduced(
    data: &Dataset,
    domain: &DomainSpec,
    spec: &KernelSpec,
    noise_var: f64,
) -> Result<ReducedRankGp> {
    if !(noise_var >= 0.0 && noise_var.is_finite()) {
        return Err(GpError::InvalidHyperparameter {
            name: "noise_var",
            value: noise_var,
        });
    }
    let basis = eigenpairs(domain)?.with_kernel(spec)?;
    let sqrt_s = DVector::from_iterator(
        basis.len(),
        basis.bound_weights()?.iter().map(|s| s.sqrt()),
    );
    let mut phi = basis.feature_matrix(data.x())?;
    for (j, mut col) in phi.column_iter_mut().enumerate() {
        col *= sqrt_s[j];
    }
    let mut system = phi.tr_mul(&phi);
    for i in 0..system.nrows() {
        system[(i, i)] += noise_var;
    }
    let (chol, jitter) = cholesky_with_jitter(&system)?;
    let v_mean = chol.solve(&phi.tr_mul(data.y()));
    let v_cov = chol.inverse() * (noise_var + jitter);

    let weight_mean = v_mean.component_mul(&sqrt_s);
    let mut weight_cov = v_cov;
    for i in 0..basis.len() {
        for j in 0..basis.len() {
            weight_cov[(i, j)] *= sqrt_s[i] * sqrt_s[j];
        }
    }
    crate::linalg::symmetrize(&mut weight_cov);
    Ok(ReducedRankGp {
        basis,
        kernel: spec.clone(),
        noise_var,
        jitter,
        weight_mean,
        weight_cov,
    })
}

impl ReducedRankGp {
    pub fn basis(&self) -> &ReducedRankBasis {
        &self.basis
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn weight_mean(&self) -> &DVector<f64> {
        &self.weight_mean
    }

    pub fn weight_cov(&self) -> &DMatrix<f64> {
        &self.weight_cov
    }

    /// Posterior mean and variance of the latent function.
    pub fn predict(&self, x_star: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let phi = self.basis.feature_matrix(x_star)?;
        let mean = &phi * &self.weight_mean;
        let projected = &phi * &self.weight_cov;
        let variance = DVector::from_iterator(
            phi.nrows(),
            (0..phi.nrows()).map(|i| projected.row(i).dot(&phi.row(i)).max(0.0)),
        );
        Ok((mean, variance))
    }
}

pub fn predict_reduced(
    model: &ReducedRankGp,
    x_star: &DMatrix<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    model.predict(x_star)
}
