use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// Normalized mean squared error in percent,
/// `100 / (n var(y)) * sum (y_i - f_i)^2`, with the population variance of `y`.
pub fn nmse(y: &[f64], f: &[f64]) -> Result<f64> {
    if y.len() != f.len() {
        return Err(BenchError::Data(format!(
            "nmse length mismatch: {} targets, {} predictions",
            y.len(),
            f.len()
        )));
    }
    if y.len() < 2 {
        return Err(BenchError::Data("nmse needs at least two points".into()));
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(BenchError::Data("nmse targets have zero variance".into()));
    }
    let sse: f64 = y.iter().zip(f).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(100.0 * sse / (n * var))
}

pub fn squared_errors(y: &[f64], f: &[f64]) -> Vec<f64> {
    y.iter().zip(f).map(|(a, b)| (a - b).powi(2)).collect()
}

/// One row of a NARX coverage study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub target_percent: f64,
    pub coverage_percent: f64,
    pub train_start: usize,
    pub black_box_nmse_percent: f64,
    pub residual_mean_nmse_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: String,
    /// Test nMSE, or the force-recovery nMSE for latent force runs. `None`
    /// when there is nothing to score against.
    pub nmse_percent: Option<f64>,
    pub log_marginal_likelihood: Option<f64>,
    pub coverage_percent: Option<f64>,
    pub wall_ms: f64,
    /// How the nMSE normalizer is computed.
    pub variance_convention: String,
    pub n_train: usize,
    pub n_test: usize,
    pub hyperparameters: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force_nmse_percent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_gp_nmse_percent: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coverage_study: Vec<CoverageRow>,
    pub squared_errors: Vec<f64>,
}

impl MetricsReport {
    pub fn new(task: &str) -> Self {
        Self {
            task: task.to_string(),
            nmse_percent: None,
            log_marginal_likelihood: None,
            coverage_percent: None,
            wall_ms: 0.0,
            variance_convention: "population".to_string(),
            n_train: 0,
            n_test: 0,
            hyperparameters: Vec::new(),
            force_nmse_percent: None,
            full_gp_nmse_percent: None,
            coverage_study: Vec::new(),
            squared_errors: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_is_zero() {
        let y = [1.0, 3.0, -2.0, 5.0];
        assert_eq!(nmse(&y, &y).unwrap(), 0.0);
    }

    #[test]
    fn constant_mean_is_hundred() {
        let y = [1.0, 3.0, -2.0, 6.0];
        let f = [2.0; 4];
        assert!((nmse(&y, &f).unwrap() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn hand_example() {
        assert_eq!(nmse(&[0.0, 2.0], &[0.0, 0.0]).unwrap(), 200.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(nmse(&[1.0, 1.0], &[0.0, 0.0]), Err(BenchError::Data(_))));
        assert!(matches!(nmse(&[1.0, 2.0], &[0.0]), Err(BenchError::Data(_))));
        assert!(nmse(&[1.0], &[0.0]).is_err());
    }

    proptest! {
        #[test]
        fn shift_invariant(
            pairs in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..30),
            c in -100.0f64..100.0,
        ) {
            let y: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let f: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            prop_assume!(y.iter().any(|v| (v - y[0]).abs() > 1e-3));
            let a = nmse(&y, &f).unwrap();
            let ys: Vec<f64> = y.iter().map(|v| v + c).collect();
            let fs: Vec<f64> = f.iter().map(|v| v + c).collect();
            let b = nmse(&ys, &fs).unwrap();
            prop_assert!(a >= 0.0);
            prop_assert!((a - b).abs() <= 1e-6 * a.max(1.0));
        }
    }
}
