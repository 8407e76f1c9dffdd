//! GP-NARX: Gaussian process regression on lagged exogenous inputs and
//! lagged outputs.
//!
//! Two grey-box variants use Morison's equation. In residual mode the GP
//! models `y_t - F_morison(U_t, dU_t)`; in input-augmentation mode the Morison
//! force is appended to the regressor instead. Both expect channel 0 of the
//! exogenous input to be the fluid velocity and channel 1 its acceleration.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GpError, Result};
use crate::gp::{fit_exact, Dataset, Prediction, TrainedGp};
use crate::kernel::KernelSpec;
use crate::mean::{MeanFunctionSpec, PhysicsMean};
use crate::physics::{morison_force, MorisonParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NarxMode {
    BlackBox,
    ResidualMean { morison: MorisonParams },
    InputAugmentation { morison: MorisonParams },
}

impl NarxMode {
    fn morison(&self) -> Option<&MorisonParams> {
        match self {
            NarxMode::BlackBox => None,
            NarxMode::ResidualMean { morison } | NarxMode::InputAugmentation { morison } => {
                Some(morison)
            }
        }
    }
}

fn default_lags() -> usize {
    4
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NarxConfig {
    /// Exogenous lags `l_u`; the current input `u_t` is always included.
    #[serde(default = "default_lags")]
    pub input_lags: usize,
    /// Autoregressive lags `l_y >= 1`.
    #[serde(default = "default_lags")]
    pub output_lags: usize,
    pub mode: NarxMode,
}

impl NarxConfig {
    pub fn new(input_lags: usize, output_lags: usize, mode: NarxMode) -> Self {
        Self {
            input_lags,
            output_lags,
            mode,
        }
    }

    /// First time index with a complete regressor.
    pub fn first_index(&self) -> usize {
        self.input_lags.max(self.output_lags)
    }

    pub fn regressor_dim(&self, channels: usize) -> usize {
        let augmented = matches!(self.mode, NarxMode::InputAugmentation { .. }) as usize;
        (self.input_lags + 1) * channels + self.output_lags + augmented
    }

    fn validate(&self, channels: usize) -> Result<()> {
        if self.output_lags == 0 {
            return Err(GpError::InvalidConfig(
                "NARX needs at least one output lag".into(),
            ));
        }
        if self.mode.morison().is_some() && channels < 2 {
            return Err(GpError::DimensionMismatch {
                expected: 2,
                actual: channels,
            });
        }
        Ok(())
    }
}

/// Uniformly sampled exogenous inputs `u` (T x c) and target `y` (T).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceData {
    u: DMatrix<f64>,
    y: DVector<f64>,
    dt: f64,
}

impl SequenceData {
    pub fn new(u: DMatrix<f64>, y: DVector<f64>, dt: f64) -> Result<Self> {
        if u.nrows() != y.len() {
            return Err(GpError::DimensionMismatch {
                expected: u.nrows(),
                actual: y.len(),
            });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(GpError::InvalidHyperparameter {
                name: "dt",
                value: dt,
            });
        }
        if u.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(GpError::NonFinite("sequence"));
        }
        Ok(Self { u, y, dt })
    }

    /// Build from explicit timestamps, which must be uniformly spaced.
    pub fn from_timestamps(u: DMatrix<f64>, y: DVector<f64>, timestamps: &[f64]) -> Result<Self> {
        if timestamps.len() != y.len() {
            return Err(GpError::DimensionMismatch {
                expected: y.len(),
                actual: timestamps.len(),
            });
        }
        if timestamps.len() < 2 {
            return Err(GpError::SeriesTooShort {
                needed: 1,
                actual: timestamps.len(),
            });
        }
        let dt = timestamps[1] - timestamps[0];
        let uniform = timestamps
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.abs().max(1.0));
        if !uniform {
            return Err(GpError::NonUniformSampling);
        }
        Self::new(u, y, dt)
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.u.ncols()
    }

    /// Samples `start..end`.
    pub fn window(&self, start: usize, end: usize) -> SequenceData {
        SequenceData {
            u: self.u.rows(start, end - start).into_owned(),
            y: self.y.rows(start, end - start).into_owned(),
            dt: self.dt,
        }
    }
}

fn regressor_row(
    cfg: &NarxConfig,
    u: &DMatrix<f64>,
    t: usize,
    y_lag: impl Fn(usize) -> f64,
) -> Vec<f64> {
    let c = u.ncols();
    let mut row = Vec::with_capacity(cfg.regressor_dim(c));
    for lag in 0..=cfg.input_lags {
        row.extend(u.row(t - lag).iter());
    }
    for lag in 1..=cfg.output_lags {
        row.push(y_lag(lag));
    }
    if let NarxMode::InputAugmentation { morison } = &cfg.mode {
        row.push(morison_force(morison, u[(t, 0)], u[(t, 1)]));
    }
    row
}

/// Lagged regressors and targets: row for time `t` is
/// `[u_t, .., u_{t-l_u}, y_{t-1}, .., y_{t-l_y}]` (plus the Morison force in
/// augmentation mode), for `t = max(l_u, l_y) .. T-1`.
pub fn build_lag_matrix(seq: &SequenceData, cfg: &NarxConfig) -> Result<Dataset> {
    cfg.validate(seq.channels())?;
    let start = cfg.first_index();
    if seq.len() <= start {
        return Err(GpError::SeriesTooShort {
            needed: start,
            actual: seq.len(),
        });
    }
    let n = seq.len() - start;
    let d = cfg.regressor_dim(seq.channels());
    let mut x = DMatrix::zeros(n, d);
    for (i, t) in (start..seq.len()).enumerate() {
        let row = regressor_row(cfg, &seq.u, t, |lag| seq.y[t - lag]);
        for (j, v) in row.into_iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    let y = seq.y.rows(start, n).into_owned();
    Dataset::new(x, y)
}

/// A GP-NARX model; the GP lives on the lag regressors.
#[derive(Debug, Clone)]
pub struct NarxModel {
    config: NarxConfig,
    channels: usize,
    gp: TrainedGp,
}

/// Prior mean implied by the NARX mode, acting on lag regressors.
pub fn mode_mean(cfg: &NarxConfig) -> MeanFunctionSpec {
    match cfg.mode {
        NarxMode::ResidualMean { morison } => MeanFunctionSpec::External(PhysicsMean::Morison {
            params: morison,
            velocity_column: 0,
            acceleration_column: 1,
        }),
        _ => MeanFunctionSpec::Zero,
    }
}

pub fn fit_narx(
    seq: &SequenceData,
    cfg: &NarxConfig,
    kernel: KernelSpec,
    noise_var: f64,
) -> Result<NarxModel> {
    let data = build_lag_matrix(seq, cfg)?;
    let gp = fit_exact(&data, kernel, mode_mean(cfg), noise_var)?;
    Ok(NarxModel {
        config: *cfg,
        channels: seq.channels(),
        gp,
    })
}

impl NarxModel {
    pub fn config(&self) -> &NarxConfig {
        &self.config
    }

    pub fn gp(&self) -> &TrainedGp {
        &self.gp
    }

    fn check_channels(&self, channels: usize) -> Result<()> {
        if channels != self.channels {
            return Err(GpError::DimensionMismatch {
                expected: self.channels,
                actual: channels,
            });
        }
        Ok(())
    }

    /// One-step-ahead prediction using measured output lags, for every time
    /// index from `max(l_u, l_y)` on.
    pub fn predict_osa(&self, seq: &SequenceData) -> Result<Prediction> {
        self.check_channels(seq.channels())?;
        let data = build_lag_matrix(seq, &self.config)?;
        self.gp.predict(data.x())
    }

    /// Mean-feedback simulation. `y_init` holds the `l_y` outputs preceding
    /// the first simulated step, oldest first; the trajectory covers time
    /// indices `l_u .. T-1` of `u`.
    pub fn simulate_free_run(&self, u: &DMatrix<f64>, y_init: &[f64]) -> Result<Vec<f64>> {
        self.free_run(u, y_init, false)
            .map(|p| p.mean.iter().copied().collect())
    }

    /// As [`simulate_free_run`](Self::simulate_free_run), also returning the
    /// GP variance at each fed-back regressor. Uncertainty in the fed-back
    /// lags is not propagated.
    pub fn simulate_free_run_with_variance(
        &self,
        u: &DMatrix<f64>,
        y_init: &[f64],
    ) -> Result<Prediction> {
        self.free_run(u, y_init, true)
    }

    fn free_run(&self, u: &DMatrix<f64>, y_init: &[f64], with_variance: bool) -> Result<Prediction> {
        self.check_channels(u.ncols())?;
        let cfg = &self.config;
        if y_init.len() != cfg.output_lags {
            return Err(GpError::DimensionMismatch {
                expected: cfg.output_lags,
                actual: y_init.len(),
            });
        }
        if u.nrows() <= cfg.input_lags {
            return Err(GpError::SeriesTooShort {
                needed: cfg.input_lags,
                actual: u.nrows(),
            });
        }
        let steps = u.nrows() - cfg.input_lags;
        let mut history = y_init.to_vec();
        let mut mean = DVector::zeros(steps);
        let mut variance = DVector::zeros(steps);
        for (k, t) in (cfg.input_lags..u.nrows()).enumerate() {
            let row = regressor_row(cfg, u, t, |lag| history[history.len() - lag]);
            let x = DMatrix::from_row_slice(1, row.len(), &row);
            let y_hat = if with_variance {
                let p = self.gp.predict(&x)?;
                variance[k] = p.variance[0];
                p.mean[0]
            } else {
                self.gp.predict_mean(&x)?[0]
            };
            if !y_hat.is_finite() {
                return Err(GpError::NonFinite("free-run prediction"));
            }
            history.push(y_hat);
            mean[k] = y_hat;
        }
        Ok(Prediction {
            mean,
            variance,
            covariance: None,
        })
    }
}

/// Percentage of test rows lying inside the per-dimension bounding box of the
/// training inputs.
pub fn coverage_metric(train: &Dataset, test: &Dataset) -> Result<f64> {
    if train.is_empty() || test.is_empty() {
        return Err(GpError::EmptyData);
    }
    if train.dim() != test.dim() {
        return Err(GpError::DimensionMismatch {
            expected: train.dim(),
            actual: test.dim(),
        });
    }
    let bounds: Vec<(f64, f64)> = train
        .x()
        .column_iter()
        .map(|c| (c.min(), c.max()))
        .collect();
    let inside = test
        .x()
        .row_iter()
        .filter(|r| {
            r.iter()
                .zip(&bounds)
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
        })
        .count();
    Ok(100.0 * inside as f64 / test.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_channel(u: &[f64], y: &[f64]) -> SequenceData {
        SequenceData::new(
            DMatrix::from_column_slice(u.len(), 1, u),
            DVector::from_column_slice(y),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn lag_matrix_hand_examples() {
        let seq = single_channel(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]);
        let d = build_lag_matrix(&seq, &NarxConfig::new(1, 1, NarxMode::BlackBox)).unwrap();
        assert_eq!(d.x(), &DMatrix::from_row_slice(2, 3, &[2.0, 1.0, 10.0, 3.0, 2.0, 20.0]));
        assert_eq!(d.y().as_slice(), &[20.0, 30.0]);

        let seq = single_channel(&[5.0, 6.0], &[1.0, 2.0]);
        let d = build_lag_matrix(&seq, &NarxConfig::new(0, 1, NarxMode::BlackBox)).unwrap();
        assert_eq!(d.x(), &DMatrix::from_row_slice(1, 2, &[6.0, 1.0]));
        assert_eq!(d.y().as_slice(), &[2.0]);
    }

    #[test]
    fn row_count_identity() {
        let seq = single_channel(&[0.0; 12], &[1.0; 12]);
        for (lu, ly) in [(0, 1), (3, 1), (2, 5), (4, 4)] {
            let cfg = NarxConfig::new(lu, ly, NarxMode::BlackBox);
            let d = build_lag_matrix(&seq, &cfg).unwrap();
            assert_eq!(d.len() + lu.max(ly), seq.len());
            assert_eq!(d.dim(), cfg.regressor_dim(1));
        }
    }

    #[test]
    fn short_series_and_zero_output_lags() {
        let seq = single_channel(&[1.0, 2.0], &[1.0, 2.0]);
        assert!(matches!(
            build_lag_matrix(&seq, &NarxConfig::new(2, 1, NarxMode::BlackBox)),
            Err(GpError::SeriesTooShort { .. })
        ));
        assert!(build_lag_matrix(&seq, &NarxConfig::new(0, 0, NarxMode::BlackBox)).is_err());
    }

    #[test]
    fn morison_modes_need_two_channels() {
        let seq = single_channel(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]);
        let m = MorisonParams {
            drag: 1.0,
            inertia: 1.0,
        };
        let cfg = NarxConfig::new(0, 1, NarxMode::ResidualMean { morison: m });
        assert!(build_lag_matrix(&seq, &cfg).is_err());
    }

    #[test]
    fn augmentation_adds_one_column() {
        let m = MorisonParams {
            drag: 0.5,
            inertia: 2.0,
        };
        let u = DMatrix::from_row_slice(4, 2, &[1.0, 0.1, -1.0, 0.2, 2.0, 0.3, 0.5, 0.4]);
        let seq = SequenceData::new(u, DVector::from_vec(vec![0.0, 1.0, 2.0, 3.0]), 0.1).unwrap();
        let bb = build_lag_matrix(&seq, &NarxConfig::new(1, 1, NarxMode::BlackBox)).unwrap();
        let aug = build_lag_matrix(
            &seq,
            &NarxConfig::new(1, 1, NarxMode::InputAugmentation { morison: m }),
        )
        .unwrap();
        assert_eq!(aug.dim(), bb.dim() + 1);
        // t = 1: U = -1, dU = 0.2
        assert_eq!(aug.x()[(0, aug.dim() - 1)], 0.5 * -1.0 + 2.0 * 0.2);
    }

    #[test]
    fn timestamps_must_be_uniform() {
        let u = DMatrix::zeros(3, 1);
        let y = DVector::zeros(3);
        assert!(SequenceData::from_timestamps(u.clone(), y.clone(), &[0.0, 0.1, 0.2]).is_ok());
        assert!(matches!(
            SequenceData::from_timestamps(u, y, &[0.0, 0.1, 0.25]),
            Err(GpError::NonUniformSampling)
        ));
    }

    #[test]
    fn coverage_examples() {
        let train = Dataset::from_columns(&[0.0, 1.0], &[0.0, 0.0]).unwrap();
        let test = Dataset::from_columns(&[0.5, 1.5, -0.5, 0.2], &[0.0; 4]).unwrap();
        assert_eq!(coverage_metric(&train, &test).unwrap(), 50.0);
        let inside = Dataset::from_columns(&[0.0, 0.3, 1.0], &[0.0; 3]).unwrap();
        assert_eq!(coverage_metric(&train, &inside).unwrap(), 100.0);
        let empty = Dataset::new(DMatrix::zeros(0, 1), DVector::zeros(0)).unwrap();
        assert!(coverage_metric(&train, &empty).is_err());

        let unit = Dataset::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 1.0]),
            DVector::zeros(2),
        )
        .unwrap();
        let out = Dataset::new(DMatrix::from_row_slice(1, 2, &[2.0, 2.0]), DVector::zeros(1)).unwrap();
        assert_eq!(coverage_metric(&unit, &out).unwrap(), 0.0);
    }
}
