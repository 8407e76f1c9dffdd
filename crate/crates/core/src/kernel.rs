//! Covariance functions and Gram matrix assembly.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GpError, Result};
use crate::physics::{sdof_kernel_unchecked, SdofKernelParams};

/// Anything usable as a GP covariance function.
pub trait Covariance {
    /// Required input dimension, `None` if any dimension is accepted.
    fn input_dim(&self) -> Option<usize>;

    /// `k(x, x')`.
    fn eval(&self, x: &[f64], x_prime: &[f64]) -> Result<f64>;
}

/// Tagged description of a covariance function and its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `sigma_f^2 exp(-0.5 sum_k ((x_k - x'_k) / l_k)^2)`. A single
    /// lengthscale is shared across dimensions, otherwise one per dimension.
    SquaredExponential { sigma_f: f64, lengthscales: Vec<f64> },
    /// `sigma_f^2 exp(-r / l)`
    Matern12 { sigma_f: f64, lengthscale: f64 },
    /// `sigma_f^2 (1 + sqrt(3) r / l) exp(-sqrt(3) r / l)`
    Matern32 { sigma_f: f64, lengthscale: f64 },
    /// Oscillator autocovariance over a scalar time input.
    SdofDerived(SdofKernelParams),
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(GpError::InvalidHyperparameter { name, value })
    }
}

impl KernelSpec {
    pub fn squared_exponential(sigma_f: f64, lengthscale: f64) -> Self {
        KernelSpec::SquaredExponential {
            sigma_f,
            lengthscales: vec![lengthscale],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::SquaredExponential {
                sigma_f,
                lengthscales,
            } => {
                positive("sigma_f", *sigma_f)?;
                if lengthscales.is_empty() {
                    return Err(GpError::InvalidConfig(
                        "squared exponential needs at least one lengthscale".into(),
                    ));
                }
                lengthscales
                    .iter()
                    .try_for_each(|l| positive("lengthscale", *l))
            }
            KernelSpec::Matern12 {
                sigma_f,
                lengthscale,
            }
            | KernelSpec::Matern32 {
                sigma_f,
                lengthscale,
            } => {
                positive("sigma_f", *sigma_f)?;
                positive("lengthscale", *lengthscale)
            }
            KernelSpec::SdofDerived(p) => p.validate(),
        }
    }

    /// Prior variance `k(x, x)`.
    pub fn variance(&self) -> f64 {
        match self {
            KernelSpec::SquaredExponential { sigma_f, .. }
            | KernelSpec::Matern12 { sigma_f, .. }
            | KernelSpec::Matern32 { sigma_f, .. } => sigma_f * sigma_f,
            KernelSpec::SdofDerived(p) => p.variance(),
        }
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        match self {
            KernelSpec::SquaredExponential { lengthscales, .. }
                if lengthscales.len() != 1 && lengthscales.len() != d =>
            {
                Err(GpError::DimensionMismatch {
                    expected: lengthscales.len(),
                    actual: d,
                })
            }
            KernelSpec::SdofDerived(_) if d != 1 => {
                Err(GpError::DimensionMismatch { expected: 1, actual: d })
            }
            _ => Ok(()),
        }
    }

    fn eval_unchecked(&self, x: &[f64], x_prime: &[f64]) -> f64 {
        match self {
            KernelSpec::SquaredExponential {
                sigma_f,
                lengthscales,
            } => {
                let r2: f64 = if lengthscales.len() == 1 {
                    let l = lengthscales[0];
                    x.iter()
                        .zip(x_prime)
                        .map(|(a, b)| ((a - b) / l).powi(2))
                        .sum()
                } else {
                    x.iter()
                        .zip(x_prime)
                        .zip(lengthscales)
                        .map(|((a, b), l)| ((a - b) / l).powi(2))
                        .sum()
                };
                sigma_f * sigma_f * (-0.5 * r2).exp()
            }
            KernelSpec::Matern12 {
                sigma_f,
                lengthscale,
            } => sigma_f * sigma_f * (-distance(x, x_prime) / lengthscale).exp(),
            KernelSpec::Matern32 {
                sigma_f,
                lengthscale,
            } => {
                let s = 3f64.sqrt() * distance(x, x_prime) / lengthscale;
                sigma_f * sigma_f * (1.0 + s) * (-s).exp()
            }
            KernelSpec::SdofDerived(p) => sdof_kernel_unchecked(p, x[0] - x_prime[0]),
        }
    }
}

fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
}

impl Covariance for KernelSpec {
    fn input_dim(&self) -> Option<usize> {
        match self {
            KernelSpec::SquaredExponential { lengthscales, .. } if lengthscales.len() > 1 => {
                Some(lengthscales.len())
            }
            KernelSpec::SdofDerived(_) => Some(1),
            _ => None,
        }
    }

    fn eval(&self, x: &[f64], x_prime: &[f64]) -> Result<f64> {
        kernel_eval(self, x, x_prime)
    }
}

/// Evaluate a kernel at a pair of points.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], x_prime: &[f64]) -> Result<f64> {
    if x.len() != x_prime.len() {
        return Err(GpError::DimensionMismatch {
            expected: x.len(),
            actual: x_prime.len(),
        });
    }
    spec.validate()?;
    spec.check_dim(x.len())?;
    Ok(spec.eval_unchecked(x, x_prime))
}

pub(crate) fn rows(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    x.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Gram matrix `K[i, j] = k(X_i, X'_j)` between the rows of two input matrices.
pub fn build_gram<K: Covariance + ?Sized>(
    kernel: &K,
    x: &DMatrix<f64>,
    x_prime: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if x.ncols() != x_prime.ncols() {
        return Err(GpError::DimensionMismatch {
            expected: x.ncols(),
            actual: x_prime.ncols(),
        });
    }
    if let Some(d) = kernel.input_dim() {
        if d != x.ncols() {
            return Err(GpError::DimensionMismatch {
                expected: d,
                actual: x.ncols(),
            });
        }
    }
    let (a, b) = (rows(x), rows(x_prime));
    let mut gram = DMatrix::zeros(a.len(), b.len());
    for (i, xi) in a.iter().enumerate() {
        for (j, xj) in b.iter().enumerate() {
            gram[(i, j)] = kernel.eval(xi, xj)?;
        }
    }
    Ok(gram)
}

/// Symmetric Gram matrix of one input set; only the lower triangle is evaluated.
pub(crate) fn build_gram_symmetric<K: Covariance + ?Sized>(
    kernel: &K,
    x: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if let Some(d) = kernel.input_dim() {
        if d != x.ncols() {
            return Err(GpError::DimensionMismatch {
                expected: d,
                actual: x.ncols(),
            });
        }
    }
    let a = rows(x);
    let n = a.len();
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval(&a[i], &a[j])?;
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    Ok(gram)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn all_specs() -> Vec<KernelSpec> {
        vec![
            KernelSpec::squared_exponential(1.5, 0.7),
            KernelSpec::Matern12 {
                sigma_f: 0.8,
                lengthscale: 2.0,
            },
            KernelSpec::Matern32 {
                sigma_f: 1.2,
                lengthscale: 0.4,
            },
            KernelSpec::SdofDerived(SdofKernelParams::new(0.1, 4.0, 3.0).unwrap()),
        ]
    }

    #[test]
    fn se_at_zero_distance() {
        let k = KernelSpec::squared_exponential(1.0, 1.0);
        assert_eq!(kernel_eval(&k, &[0.0], &[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn matern12_hand_value() {
        let k = KernelSpec::Matern12 {
            sigma_f: 1.0,
            lengthscale: 2.0,
        };
        assert_relative_eq!(
            kernel_eval(&k, &[0.0], &[2.0]).unwrap(),
            (-1.0f64).exp(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn symmetric_and_variance_on_diagonal() {
        for spec in all_specs() {
            let (x, y) = ([0.3], [-1.1]);
            assert_eq!(
                kernel_eval(&spec, &x, &y).unwrap(),
                kernel_eval(&spec, &y, &x).unwrap()
            );
            assert_relative_eq!(
                kernel_eval(&spec, &x, &x).unwrap(),
                spec.variance(),
                max_relative = 1e-15
            );
        }
    }

    #[test]
    fn ard_lengthscales() {
        let k = KernelSpec::SquaredExponential {
            sigma_f: 1.0,
            lengthscales: vec![1.0, 2.0],
        };
        let v = kernel_eval(&k, &[0.0, 0.0], &[1.0, 2.0]).unwrap();
        assert_relative_eq!(v, (-1.0f64).exp(), max_relative = 1e-15);
        assert!(kernel_eval(&k, &[0.0], &[1.0]).is_err());
    }

    #[test]
    fn errors() {
        let k = KernelSpec::squared_exponential(1.0, 1.0);
        assert!(matches!(
            kernel_eval(&k, &[0.0, 1.0], &[0.0]),
            Err(GpError::DimensionMismatch { .. })
        ));
        let bad = KernelSpec::Matern32 {
            sigma_f: 1.0,
            lengthscale: 0.0,
        };
        assert!(matches!(
            kernel_eval(&bad, &[0.0], &[0.0]),
            Err(GpError::InvalidHyperparameter { .. })
        ));
        let sdof = KernelSpec::SdofDerived(SdofKernelParams::new(0.1, 1.0, 1.0).unwrap());
        assert!(kernel_eval(&sdof, &[0.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn gram_single_point_and_repeated_rows() {
        let k = KernelSpec::squared_exponential(2.0, 0.5);
        let x = DMatrix::from_row_slice(1, 1, &[0.4]);
        assert_eq!(build_gram(&k, &x, &x).unwrap()[(0, 0)], 4.0);

        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let g = build_gram(&k, &x, &x).unwrap();
        assert!(g.iter().all(|&v| v == 4.0));
    }

    #[test]
    fn gram_matches_entrywise_loop() {
        let k = KernelSpec::Matern32 {
            sigma_f: 1.1,
            lengthscale: 0.9,
        };
        let x = DMatrix::from_row_slice(
            5,
            2,
            &[0.1, 0.2, -0.5, 1.0, 2.2, -0.3, 0.0, 0.0, 1.5, 1.5],
        );
        let xp = DMatrix::from_row_slice(3, 2, &[0.3, 0.3, -1.0, 2.0, 0.7, -0.2]);
        let g = build_gram(&k, &x, &xp).unwrap();
        for i in 0..5 {
            for j in 0..3 {
                let a: Vec<f64> = x.row(i).iter().copied().collect();
                let b: Vec<f64> = xp.row(j).iter().copied().collect();
                assert_eq!(g[(i, j)], kernel_eval(&k, &a, &b).unwrap());
            }
        }
        let sym = build_gram_symmetric(&k, &x).unwrap();
        assert_eq!(sym, build_gram(&k, &x, &x).unwrap());
        assert!(build_gram(&k, &x, &DMatrix::zeros(2, 3)).is_err());
    }
}
