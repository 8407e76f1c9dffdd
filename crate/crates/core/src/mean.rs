//! Prior mean functions.

use serde::{Deserialize, Serialize};

use crate::error::{GpError, Result};
use crate::physics::{linear_mean, morison_force, MorisonParams};

/// Named physics model used as a GP prior mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum PhysicsMean {
    /// Morison force computed from two input columns holding the fluid
    /// velocity and acceleration.
    Morison {
        params: MorisonParams,
        velocity_column: usize,
        acceleration_column: usize,
    },
}

impl PhysicsMean {
    fn eval(&self, x: &[f64]) -> Result<f64> {
        match self {
            PhysicsMean::Morison {
                params,
                velocity_column,
                acceleration_column,
            } => {
                let needed = velocity_column.max(acceleration_column) + 1;
                if x.len() < needed {
                    return Err(GpError::DimensionMismatch {
                        expected: needed,
                        actual: x.len(),
                    });
                }
                Ok(morison_force(
                    params,
                    x[*velocity_column],
                    x[*acceleration_column],
                ))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum MeanFunctionSpec {
    #[default]
    Zero,
    Linear {
        intercept: f64,
        slope: Vec<f64>,
    },
    External(PhysicsMean),
}

impl MeanFunctionSpec {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match self {
            MeanFunctionSpec::Zero => Ok(0.0),
            MeanFunctionSpec::Linear { intercept, slope } => linear_mean(*intercept, slope, x),
            MeanFunctionSpec::External(physics) => physics.eval(x),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, MeanFunctionSpec::Zero)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_mean_is_exactly_zero() {
        for x in [[1e300, -3.0], [f64::MIN_POSITIVE, 0.0]] {
            assert_eq!(MeanFunctionSpec::Zero.eval(&x).unwrap(), 0.0);
        }
    }

    #[test]
    fn linear_is_intercept_plus_dot() {
        let m = MeanFunctionSpec::Linear {
            intercept: 0.5,
            slope: vec![2.0, -1.0],
        };
        assert_eq!(m.eval(&[3.0, 4.0]).unwrap(), 0.5 + 6.0 - 4.0);
        assert!(m.eval(&[3.0]).is_err());
    }

    #[test]
    fn morison_mean_reads_columns() {
        let m = MeanFunctionSpec::External(PhysicsMean::Morison {
            params: MorisonParams {
                drag: 1.0,
                inertia: 2.0,
            },
            velocity_column: 2,
            acceleration_column: 0,
        });
        assert_eq!(m.eval(&[0.5, 9.0, 2.0]).unwrap(), 5.0);
        assert!(m.eval(&[0.5, 9.0]).is_err());
    }
}
