//! Physics-derived priors: the white-noise driven oscillator covariance,
//! Morison's wave-force law, linear environmental trends and the spectral
//! densities of the stationary kernels.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

use crate::error::{GpError, Result};
use crate::kernel::KernelSpec;

/// Hyperparameters of the single-degree-of-freedom oscillator covariance.
///
/// Mass is fixed at one: the covariance only depends on `sigma2 / m^2`, so
/// `sigma2` absorbs the mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdofKernelParams {
    /// Damping ratio, `0 < zeta < 1`.
    pub zeta: f64,
    /// Undamped natural frequency in rad/s.
    pub omega_n: f64,
    /// Intensity of the white-noise forcing, `E[F(t)F(t')] = sigma2 * delta(t - t')`.
    pub sigma2: f64,
}

impl SdofKernelParams {
    pub fn new(zeta: f64, omega_n: f64, sigma2: f64) -> Result<Self> {
        let params = Self {
            zeta,
            omega_n,
            sigma2,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(GpError::InvalidHyperparameter {
                name: "zeta",
                value: self.zeta,
            });
        }
        if !(self.omega_n > 0.0 && self.omega_n.is_finite()) {
            return Err(GpError::InvalidHyperparameter {
                name: "omega_n",
                value: self.omega_n,
            });
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(GpError::InvalidHyperparameter {
                name: "sigma2",
                value: self.sigma2,
            });
        }
        Ok(())
    }

    /// Damped natural frequency.
    pub fn omega_d(&self) -> f64 {
        self.omega_n * (1.0 - self.zeta * self.zeta).sqrt()
    }

    /// Stationary displacement variance `k(0)`.
    pub fn variance(&self) -> f64 {
        self.sigma2 / (4.0 * self.zeta * self.omega_n.powi(3))
    }

    /// Build parameters from physical mass, damping and stiffness.
    pub fn from_physical(mass: f64, damping: f64, stiffness: f64, sigma2: f64) -> Result<Self> {
        if !(mass > 0.0) || !(stiffness > 0.0) {
            return Err(GpError::InvalidHyperparameter {
                name: "mass/stiffness",
                value: mass.min(stiffness),
            });
        }
        let omega_n = (stiffness / mass).sqrt();
        let zeta = damping / (2.0 * (stiffness * mass).sqrt());
        Self::new(zeta, omega_n, sigma2 / (mass * mass))
    }
}

/// Autocovariance of a linear oscillator under white-noise forcing at lag `tau`.
pub fn sdof_kernel_eval(params: &SdofKernelParams, tau: f64) -> Result<f64> {
    params.validate()?;
    if !tau.is_finite() {
        return Err(GpError::NonFinite("lag"));
    }
    Ok(sdof_kernel_unchecked(params, tau))
}

pub(crate) fn sdof_kernel_unchecked(params: &SdofKernelParams, tau: f64) -> f64 {
    let decay = params.zeta * params.omega_n;
    let omega_d = params.omega_d();
    let abs_tau = tau.abs();
    params.variance()
        * (-decay * abs_tau).exp()
        * ((omega_d * abs_tau).cos() + decay / omega_d * (omega_d * abs_tau).sin())
}

/// Coefficients of the simplified two-term Morison equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorisonParams {
    /// Drag coefficient multiplying `U|U|`.
    pub drag: f64,
    /// Inertia coefficient multiplying `dU/dt`.
    pub inertia: f64,
}

/// Wave force from fluid velocity `u` and acceleration `u_dot`.
pub fn morison_force(params: &MorisonParams, u: f64, u_dot: f64) -> f64 {
    params.drag * u * u.abs() + params.inertia * u_dot
}

/// `theta0 + theta . x`
pub fn linear_mean(theta0: f64, theta: &[f64], x: &[f64]) -> Result<f64> {
    if theta.len() != x.len() {
        return Err(GpError::DimensionMismatch {
            expected: theta.len(),
            actual: x.len(),
        });
    }
    Ok(theta0 + theta.iter().zip(x).map(|(t, v)| t * v).sum::<f64>())
}

/// One-dimensional spectral density `S(omega)` of a stationary kernel, with
/// the convention `k(tau) = 1/(2 pi) * integral S(omega) cos(omega tau) d omega`.
///
/// For ARD squared-exponential kernels the first lengthscale is used.
pub fn spectral_density(spec: &KernelSpec, omega: f64) -> Result<f64> {
    spectral_density_nd(spec, &[omega])
}

/// Spectral density at a frequency vector.
///
/// The squared-exponential density factorizes over dimensions (one
/// lengthscale per dimension, or a shared one). Matérn kernels are isotropic
/// and depend on the norm of `omega` through the `d`-dimensional closed form.
pub fn spectral_density_nd(spec: &KernelSpec, omega: &[f64]) -> Result<f64> {
    spec.validate()?;
    let d = omega.len();
    if d == 0 {
        return Err(GpError::DimensionMismatch {
            expected: 1,
            actual: 0,
        });
    }
    match spec {
        KernelSpec::SquaredExponential {
            sigma_f,
            lengthscales,
        } => {
            if lengthscales.len() != 1 && lengthscales.len() != d {
                return Err(GpError::DimensionMismatch {
                    expected: lengthscales.len(),
                    actual: d,
                });
            }
            let mut s = sigma_f * sigma_f;
            for (k, w) in omega.iter().enumerate() {
                let ell = if lengthscales.len() == 1 {
                    lengthscales[0]
                } else {
                    lengthscales[k]
                };
                s *= (2.0 * PI).sqrt() * ell * (-0.5 * w * w * ell * ell).exp();
            }
            Ok(s)
        }
        KernelSpec::Matern12 {
            sigma_f,
            lengthscale,
        } => Ok(matern_density(0.5, *sigma_f, *lengthscale, omega)),
        KernelSpec::Matern32 {
            sigma_f,
            lengthscale,
        } => Ok(matern_density(1.5, *sigma_f, *lengthscale, omega)),
        KernelSpec::SdofDerived(_) => Err(GpError::UnsupportedKernel(
            "spectral density of the oscillator kernel",
        )),
    }
}

fn matern_density(nu: f64, sigma_f: f64, lengthscale: f64, omega: &[f64]) -> f64 {
    let d = omega.len() as f64;
    let lambda2 = 2.0 * nu / (lengthscale * lengthscale);
    let norm2: f64 = omega.iter().map(|w| w * w).sum();
    let constant = 2f64.powf(d) * PI.powf(d / 2.0) * gamma(nu + d / 2.0) / gamma(nu);
    sigma_f * sigma_f * constant * lambda2.powf(nu) * (lambda2 + norm2).powf(-(nu + d / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sdof_at_zero_lag_is_stationary_variance() {
        let p = SdofKernelParams::new(0.1, 2.0 * PI, 1.0).unwrap();
        let k0 = sdof_kernel_eval(&p, 0.0).unwrap();
        assert_relative_eq!(k0, 1.0 / (4.0 * 0.1 * (2.0 * PI).powi(3)), max_relative = 1e-15);
    }

    #[test]
    fn sdof_rejects_bad_damping() {
        for zeta in [0.0, 1.0, 1.5, -0.1, f64::NAN] {
            let p = SdofKernelParams {
                zeta,
                omega_n: 1.0,
                sigma2: 1.0,
            };
            assert!(sdof_kernel_eval(&p, 0.3).is_err());
        }
    }

    #[test]
    fn sdof_is_even() {
        let p = SdofKernelParams::new(0.05, 3.0, 2.0).unwrap();
        for tau in [0.01, 0.3, 1.7, 12.0] {
            assert_eq!(
                sdof_kernel_eval(&p, tau).unwrap(),
                sdof_kernel_eval(&p, -tau).unwrap()
            );
        }
    }

    #[test]
    fn physical_parametrization() {
        // m = 2, k = 8 -> omega_n = 2; c = 0.8 -> zeta = 0.8 / (2 * 4) = 0.1
        let p = SdofKernelParams::from_physical(2.0, 0.8, 8.0, 4.0).unwrap();
        assert_relative_eq!(p.omega_n, 2.0);
        assert_relative_eq!(p.zeta, 0.1);
        assert_relative_eq!(p.sigma2, 1.0);
    }

    #[test]
    fn morison_examples() {
        let drag_only = MorisonParams {
            drag: 1.0,
            inertia: 0.0,
        };
        assert_eq!(morison_force(&drag_only, 0.0, 0.0), 0.0);
        assert_eq!(morison_force(&drag_only, -1.0, 0.0), -1.0);
        assert_eq!(morison_force(&drag_only, 1.0, 0.0), 1.0);
        let both = MorisonParams {
            drag: 1.0,
            inertia: 2.0,
        };
        assert_eq!(morison_force(&both, 2.0, 0.5), 5.0);
    }

    #[test]
    fn linear_mean_examples() {
        assert_eq!(linear_mean(0.0, &[0.0, 0.0], &[3.0, -1.0]).unwrap(), 0.0);
        assert_eq!(linear_mean(1.0, &[2.0], &[3.0]).unwrap(), 7.0);
        assert!(linear_mean(1.0, &[2.0], &[3.0, 1.0]).is_err());
        let (x, xp) = ([1.5, -2.0], [0.25, 4.0]);
        let mid = [0.5 * (x[0] + xp[0]), 0.5 * (x[1] + xp[1])];
        let m = |v: &[f64]| linear_mean(0.7, &[1.3, -0.4], v).unwrap();
        assert_relative_eq!(m(&mid), 0.5 * m(&x) + 0.5 * m(&xp), max_relative = 1e-14);
    }

    #[test]
    fn matern12_density_at_origin() {
        // lambda = 1: S(0) = 2 sigma^2 lambda / lambda^2 = 2
        let spec = KernelSpec::Matern12 {
            sigma_f: 1.0,
            lengthscale: 1.0,
        };
        assert_relative_eq!(spectral_density(&spec, 0.0).unwrap(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn matern32_density_closed_form() {
        // S = 4 sigma^2 lambda^3 / (lambda^2 + w^2)^2, lambda = sqrt(3) / ell
        let spec = KernelSpec::Matern32 {
            sigma_f: 1.3,
            lengthscale: 0.7,
        };
        let lambda = 3f64.sqrt() / 0.7;
        for w in [0.0, 0.5, 4.0] {
            let expected = 4.0 * 1.69 * lambda.powi(3) / (lambda * lambda + w * w).powi(2);
            assert_relative_eq!(spectral_density(&spec, w).unwrap(), expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn se_density_factorizes() {
        let spec = KernelSpec::SquaredExponential {
            sigma_f: 2.0,
            lengthscales: vec![0.5, 1.5],
        };
        let s = spectral_density_nd(&spec, &[1.0, 0.3]).unwrap();
        let expected = 4.0
            * (2.0 * PI).sqrt()
            * 0.5
            * (-0.5f64 * 0.25).exp()
            * (2.0 * PI).sqrt()
            * 1.5
            * (-0.5f64 * 0.09 * 2.25).exp();
        assert_relative_eq!(s, expected, max_relative = 1e-14);
    }

    #[test]
    fn density_of_oscillator_kernel_is_unsupported() {
        let spec = KernelSpec::SdofDerived(SdofKernelParams::new(0.1, 1.0, 1.0).unwrap());
        assert!(matches!(
            spectral_density(&spec, 0.0),
            Err(GpError::UnsupportedKernel(_))
        ));
    }
}
