//! Experiment execution: load data, fit, predict, score, write artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use greybox_core::latent_force::{
    estimate_force, matern_to_ss, optimize_force_prior, StructuralModel,
};
use greybox_core::narx::{
    build_lag_matrix, coverage_metric, fit_narx, NarxConfig, NarxMode, NarxModel, SequenceData,
};
use greybox_core::optimize::{pso_minimize, PsoConfig};
use greybox_core::physics::SdofKernelParams;
use greybox_core::reduced_rank::{eigenpairs, fit_reduced, DomainSpec, ReducedRankKernel};
use greybox_core::{fit_exact, Dataset, KernelSpec, MeanFunctionSpec, Prediction};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::{
    ChainStructure, CoverageStudySpec, ExperimentConfig, MeanChoice, NarxPrediction, TaskSpec,
};
use crate::error::{BenchError, Result};
use crate::io::{write_json, Table};
use crate::metrics::{nmse, squared_errors, CoverageRow, MetricsReport};

/// Everything needed to rebuild a fitted model for `predict`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SavedModel {
    ExactGp {
        inputs: Vec<String>,
        output: String,
        kernel: KernelSpec,
        mean: MeanFunctionSpec,
        noise_var: f64,
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
    },
    ReducedRank {
        inputs: Vec<String>,
        output: String,
        domain: DomainSpec,
        kernel: KernelSpec,
        noise_var: f64,
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
    },
    Narx {
        inputs: Vec<String>,
        output: String,
        config: NarxConfig,
        kernel: KernelSpec,
        noise_var: f64,
        dt: f64,
        u: Vec<Vec<f64>>,
        y: Vec<f64>,
    },
}

/// In-memory result of a run; nothing has been written yet.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub metrics: MetricsReport,
    /// Columns `index, truth, mean, variance`.
    pub predictions: Table,
    pub model: Option<SavedModel>,
    /// Further named tables, written as `<name>.csv`.
    pub extra: Vec<(String, Table)>,
}

fn matrix_rows(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    x.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn rows_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(BenchError::Data("ragged saved matrix".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
}

fn input_matrix(table: &Table, inputs: &[String]) -> Result<DMatrix<f64>> {
    if inputs.is_empty() {
        return Err(BenchError::Config("no input columns".into()));
    }
    let cols: Vec<&[f64]> = inputs.iter().map(|n| table.column(n)).collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(table.len(), cols.len(), |i, j| cols[j][i]))
}

fn prediction_table(index: &[usize], truth: &[f64], pred: &Prediction) -> Result<Table> {
    Table::new("index", index.iter().map(|&i| i as f64).collect())
        .with("truth", truth.to_vec())?
        .with("mean", pred.mean.iter().copied().collect())?
        .with("variance", pred.variance.iter().copied().collect())
}

fn negative_lml<K: greybox_core::kernel::Covariance>(
    data: &Dataset,
    kernel: K,
    mean: &MeanFunctionSpec,
    noise_var: f64,
) -> f64 {
    match fit_exact(data, kernel, mean.clone(), noise_var) {
        Ok(m) if m.log_marginal_likelihood().is_finite() => -m.log_marginal_likelihood(),
        _ => f64::INFINITY,
    }
}

fn check_bounds(pso: &PsoConfig, expected: usize, what: &str) -> Result<()> {
    if pso.bounds.len() != expected {
        return Err(BenchError::Config(format!(
            "{what} expects {expected} optimizer bounds, got {}",
            pso.bounds.len()
        )));
    }
    Ok(())
}

/// Number of searched parameters for a kernel template (noise included).
pub fn exact_param_count(template: &KernelSpec) -> usize {
    match template {
        KernelSpec::SquaredExponential { lengthscales, .. } => lengthscales.len() + 2,
        KernelSpec::Matern12 { .. } | KernelSpec::Matern32 { .. } => 3,
        KernelSpec::SdofDerived(_) => 4,
    }
}

/// Map a searched parameter vector onto the template's family.
pub fn exact_params(template: &KernelSpec, p: &[f64]) -> Result<(KernelSpec, f64)> {
    let last = p[p.len() - 1];
    let kernel = match template {
        KernelSpec::SquaredExponential { .. } => KernelSpec::SquaredExponential {
            sigma_f: p[0],
            lengthscales: p[1..p.len() - 1].to_vec(),
        },
        KernelSpec::Matern12 { .. } => KernelSpec::Matern12 {
            sigma_f: p[0],
            lengthscale: p[1],
        },
        KernelSpec::Matern32 { .. } => KernelSpec::Matern32 {
            sigma_f: p[0],
            lengthscale: p[1],
        },
        KernelSpec::SdofDerived(_) => KernelSpec::SdofDerived(SdofKernelParams::new(p[0], p[1], p[2])?),
    };
    Ok((kernel, last * last))
}

fn optimize_exact(
    data: &Dataset,
    template: &KernelSpec,
    mean: &MeanFunctionSpec,
    pso: &PsoConfig,
) -> Result<(KernelSpec, f64, Vec<f64>)> {
    check_bounds(pso, exact_param_count(template), "exact GP")?;
    let res = pso_minimize(
        |p| match exact_params(template, p) {
            Ok((k, nv)) => negative_lml(data, k, mean, nv),
            Err(_) => f64::INFINITY,
        },
        pso,
    )?;
    if !res.best_value.is_finite() {
        return Err(BenchError::Numerical("no finite likelihood inside the bounds".into()));
    }
    let (k, nv) = exact_params(template, &res.best_params)?;
    Ok((k, nv, res.best_params))
}

/// Least-squares linear mean `b0 + b^T x` over the training rows.
pub fn least_squares_mean(data: &Dataset) -> Result<MeanFunctionSpec> {
    let (n, d) = (data.len(), data.dim());
    let a = DMatrix::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { data.x()[(i, j - 1)] });
    let beta = a
        .svd(true, true)
        .solve(data.y(), 1e-12)
        .map_err(|e| BenchError::Numerical(format!("least squares mean: {e}")))?;
    Ok(MeanFunctionSpec::Linear {
        intercept: beta[0],
        slope: beta.iter().skip(1).copied().collect(),
    })
}

fn kernel_hyperparameters(kernel: &KernelSpec, noise_var: f64) -> Vec<f64> {
    let mut v = match kernel {
        KernelSpec::SquaredExponential {
            sigma_f,
            lengthscales,
        } => std::iter::once(*sigma_f).chain(lengthscales.iter().copied()).collect(),
        KernelSpec::Matern12 {
            sigma_f,
            lengthscale,
        }
        | KernelSpec::Matern32 {
            sigma_f,
            lengthscale,
        } => vec![*sigma_f, *lengthscale],
        KernelSpec::SdofDerived(p) => vec![p.zeta, p.omega_n, p.sigma2],
    };
    v.push(noise_var.sqrt());
    v
}

fn run_exact(
    cfg: &ExperimentConfig,
    table: &Table,
    inputs: &[String],
    output: &str,
    kernel: &KernelSpec,
    mean: &MeanChoice,
    noise_var: f64,
) -> Result<RunArtifacts> {
    let x = input_matrix(table, inputs)?;
    let y = DVector::from_column_slice(table.column(output)?);
    let all = Dataset::new(x, y)?;
    let (train_idx, test_idx) = cfg.split.indices(table)?;
    let train = all.select(&train_idx);
    let test = all.select(&test_idx);

    let mean = match mean {
        MeanChoice::Zero => MeanFunctionSpec::Zero,
        MeanChoice::LeastSquares => least_squares_mean(&train)?,
        MeanChoice::Fixed { mean } => mean.clone(),
    };
    let (kernel, noise_var) = match &cfg.optimizer {
        Some(pso) => {
            let (k, nv, _) = optimize_exact(&train, kernel, &mean, pso)?;
            (k, nv)
        }
        None => (kernel.clone(), noise_var),
    };
    let model = fit_exact(&train, kernel.clone(), mean.clone(), noise_var)?;
    let pred = model.predict(test.x())?;
    let truth = test.y().as_slice();

    let mut metrics = MetricsReport::new("exact_gp");
    metrics.nmse_percent = Some(nmse(truth, pred.mean.as_slice())?);
    metrics.log_marginal_likelihood = Some(model.log_marginal_likelihood());
    metrics.coverage_percent = Some(coverage_metric(&train, &test)?);
    metrics.n_train = train.len();
    metrics.n_test = test.len();
    metrics.hyperparameters = kernel_hyperparameters(&kernel, noise_var);
    metrics.squared_errors = squared_errors(truth, pred.mean.as_slice());
    Ok(RunArtifacts {
        metrics,
        predictions: prediction_table(&test_idx, truth, &pred)?,
        model: Some(SavedModel::ExactGp {
            inputs: inputs.to_vec(),
            output: output.to_string(),
            kernel,
            mean,
            noise_var,
            x: matrix_rows(train.x()),
            y: train.y().iter().copied().collect(),
        }),
        extra: Vec::new(),
    })
}

fn narx_params(
    template: &KernelSpec,
    lags: &NarxConfig,
    channels: usize,
    p: &[f64],
) -> Result<(KernelSpec, f64)> {
    match template {
        KernelSpec::SquaredExponential { .. } => {
            let inputs = (lags.input_lags + 1) * channels;
            let mut ls = vec![p[1]; inputs];
            ls.extend(std::iter::repeat_n(p[2], lags.output_lags));
            if matches!(lags.mode, NarxMode::InputAugmentation { .. }) {
                ls.push(p[1]);
            }
            Ok((
                KernelSpec::SquaredExponential {
                    sigma_f: p[0],
                    lengthscales: ls,
                },
                p[3] * p[3],
            ))
        }
        KernelSpec::Matern12 { .. } | KernelSpec::Matern32 { .. } => exact_params(template, p),
        KernelSpec::SdofDerived(_) => Err(BenchError::Config(
            "the oscillator kernel takes a scalar time input, not NARX regressors".into(),
        )),
    }
}

fn narx_param_count(template: &KernelSpec) -> usize {
    match template {
        KernelSpec::SquaredExponential { .. } => 4,
        _ => 3,
    }
}

fn fit_narx_tuned(
    seq: &SequenceData,
    lags: &NarxConfig,
    kernel: &KernelSpec,
    noise_var: f64,
    optimizer: Option<&PsoConfig>,
) -> Result<NarxModel> {
    let (kernel, noise_var) = match optimizer {
        Some(pso) => {
            check_bounds(pso, narx_param_count(kernel), "NARX")?;
            let data = build_lag_matrix(seq, lags)?;
            let mean = greybox_core::narx::mode_mean(lags);
            let c = seq.channels();
            let res = pso_minimize(
                |p| match narx_params(kernel, lags, c, p) {
                    Ok((k, nv)) => negative_lml(&data, k, &mean, nv),
                    Err(_) => f64::INFINITY,
                },
                pso,
            )?;
            if !res.best_value.is_finite() {
                return Err(BenchError::Numerical("no finite likelihood inside the bounds".into()));
            }
            narx_params(kernel, lags, c, &res.best_params)?
        }
        None => (kernel.clone(), noise_var),
    };
    Ok(fit_narx(seq, lags, kernel, noise_var)?)
}

/// Predict `y[start..end]` of `seq` with measured lags (one step ahead) or
/// by mean feedback seeded from the measurements just before `start`.
pub fn narx_predict(
    model: &NarxModel,
    seq: &SequenceData,
    start: usize,
    end: usize,
    mode: NarxPrediction,
) -> Result<Prediction> {
    let cfg = model.config();
    let first = cfg.first_index();
    if start < first || end > seq.len() || start >= end {
        return Err(BenchError::Config(format!(
            "NARX test range [{start}, {end}) needs start >= {first} and end <= {}",
            seq.len()
        )));
    }
    match mode {
        NarxPrediction::OneStepAhead => Ok(model.predict_osa(&seq.window(start - first, end))?),
        NarxPrediction::FreeRun => {
            let u = seq.u().rows(start - cfg.input_lags, end - start + cfg.input_lags).into_owned();
            let seed: Vec<f64> = (start - cfg.output_lags..start).map(|i| seq.y()[i]).collect();
            Ok(model.simulate_free_run_with_variance(&u, &seed)?)
        }
    }
}

/// Coverage of the test window's current inputs by a training window's.
fn input_coverage(seq: &SequenceData, lags: &NarxConfig, train: (usize, usize), test: (usize, usize)) -> Result<f64> {
    let c = seq.channels();
    let first = lags.first_index();
    let current = |d: Dataset| -> Result<Dataset> {
        let x = d.x().columns(0, c).into_owned();
        Ok(Dataset::new(x, d.y().clone())?)
    };
    let tr = current(build_lag_matrix(&seq.window(train.0, train.1), lags)?)?;
    let te = current(build_lag_matrix(&seq.window(test.0 - first, test.1), lags)?)?;
    Ok(coverage_metric(&tr, &te)?)
}

fn contiguous(idx: &[usize]) -> Option<(usize, usize)> {
    let (a, b) = (*idx.first()?, *idx.last()? + 1);
    (b - a == idx.len()).then_some((a, b))
}

/// Train black-box and Morison-residual NARX models on windows whose input
/// coverage of the test window is closest to each target level, and score
/// free-run predictions on the test window.
pub fn coverage_study(
    seq: &SequenceData,
    lags: &NarxConfig,
    kernel: &KernelSpec,
    noise_var: f64,
    optimizer: Option<&PsoConfig>,
    study: &CoverageStudySpec,
) -> Result<Vec<CoverageRow>> {
    let first = lags.first_index();
    let (t0, t1) = (study.test[0], study.test[1]);
    if t0 < first || t1 > seq.len() || t0 >= t1 {
        return Err(BenchError::Config(format!("coverage test window {:?} invalid", study.test)));
    }
    let len = study.train_length;
    if len <= first + 1 {
        return Err(BenchError::Config("coverage train_length too short".into()));
    }
    let mut candidates = Vec::new();
    let mut s = 0;
    while s + len <= seq.len() {
        // Keep the training window clear of the test window and its lags.
        if s + len <= t0 - first || s >= t1 {
            candidates.push((s, input_coverage(seq, lags, (s, s + len), (t0, t1))?));
        }
        s += study.stride.max(1);
    }
    if candidates.is_empty() {
        return Err(BenchError::Config("no training window fits beside the test window".into()));
    }

    let truth = &seq.y().as_slice()[t0..t1];
    let mut rows = Vec::new();
    for &level in &study.levels {
        let &(start, achieved) = candidates
            .iter()
            .min_by(|a, b| (a.1 - level).abs().total_cmp(&(b.1 - level).abs()))
            .expect("non-empty");
        let train = seq.window(start, start + len);
        let score = |mode: NarxMode| -> Result<f64> {
            let cfg = NarxConfig { mode, ..*lags };
            let model = fit_narx_tuned(&train, &cfg, kernel, noise_var, optimizer)?;
            let pred = narx_predict(&model, seq, t0, t1, NarxPrediction::FreeRun)?;
            nmse(truth, pred.mean.as_slice())
        };
        let black_box = score(NarxMode::BlackBox)?;
        let residual = score(NarxMode::ResidualMean {
            morison: study.morison,
        })?;
        rows.push(CoverageRow {
            target_percent: level,
            coverage_percent: achieved,
            train_start: start,
            black_box_nmse_percent: black_box,
            residual_mean_nmse_percent: residual,
        });
    }
    Ok(rows)
}

/// Build the NARX sequence from named table columns.
pub fn narx_sequence(table: &Table, inputs: &[String], output: &str) -> Result<SequenceData> {
    let u = input_matrix(table, inputs)?;
    let y = DVector::from_column_slice(table.column(output)?);
    Ok(SequenceData::from_timestamps(u, y, table.time())?)
}

#[allow(clippy::too_many_arguments)]
fn run_narx(
    cfg: &ExperimentConfig,
    table: &Table,
    inputs: &[String],
    output: &str,
    lags: &NarxConfig,
    kernel: &KernelSpec,
    noise_var: f64,
    prediction: NarxPrediction,
    study: Option<&CoverageStudySpec>,
) -> Result<RunArtifacts> {
    let seq = narx_sequence(table, inputs, output)?;
    let (train_idx, test_idx) = cfg.split.indices(table)?;
    let (a, b) = contiguous(&train_idx)
        .ok_or_else(|| BenchError::Config("NARX training rows must be contiguous".into()))?;
    let (c, d) = contiguous(&test_idx)
        .ok_or_else(|| BenchError::Config("NARX test rows must be contiguous".into()))?;
    let train = seq.window(a, b);
    let model = fit_narx_tuned(&train, lags, kernel, noise_var, cfg.optimizer.as_ref())?;
    let pred = narx_predict(&model, &seq, c, d, prediction)?;
    let truth = &seq.y().as_slice()[c..d];

    let mut metrics = MetricsReport::new("narx");
    metrics.nmse_percent = Some(nmse(truth, pred.mean.as_slice())?);
    metrics.log_marginal_likelihood = Some(model.gp().log_marginal_likelihood());
    metrics.coverage_percent = Some(input_coverage(&seq, lags, (a, b), (c, d))?);
    metrics.n_train = model.gp().data().len();
    metrics.n_test = d - c;
    metrics.hyperparameters = kernel_hyperparameters(model.gp().kernel(), model.gp().noise_var());
    metrics.squared_errors = squared_errors(truth, pred.mean.as_slice());

    let mut extra = Vec::new();
    if let Some(study) = study {
        let rows = coverage_study(&seq, lags, kernel, noise_var, cfg.optimizer.as_ref(), study)?;
        let mut t = Table::new("target_percent", rows.iter().map(|r| r.target_percent).collect());
        t.push("coverage_percent", rows.iter().map(|r| r.coverage_percent).collect())?;
        t.push("black_box_nmse_percent", rows.iter().map(|r| r.black_box_nmse_percent).collect())?;
        t.push(
            "residual_mean_nmse_percent",
            rows.iter().map(|r| r.residual_mean_nmse_percent).collect(),
        )?;
        extra.push(("coverage".to_string(), t));
        metrics.coverage_study = rows;
    }

    let index: Vec<usize> = (c..d).collect();
    Ok(RunArtifacts {
        metrics,
        predictions: prediction_table(&index, truth, &pred)?,
        model: Some(SavedModel::Narx {
            inputs: inputs.to_vec(),
            output: output.to_string(),
            config: *lags,
            kernel: model.gp().kernel().clone(),
            noise_var: model.gp().noise_var(),
            dt: train.dt(),
            u: matrix_rows(train.u()),
            y: train.y().iter().copied().collect(),
        }),
        extra,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_reduced(
    cfg: &ExperimentConfig,
    table: &Table,
    inputs: &[String],
    output: &str,
    domain: &DomainSpec,
    kernel: &KernelSpec,
    noise_var: f64,
    compare_full: bool,
) -> Result<RunArtifacts> {
    if matches!(kernel, KernelSpec::SdofDerived(_)) {
        return Err(BenchError::Config("reduced-rank GP needs an SE or Matérn kernel".into()));
    }
    let x = input_matrix(table, inputs)?;
    let y = DVector::from_column_slice(table.column(output)?);
    let all = Dataset::new(x, y)?;
    let (train_idx, test_idx) = cfg.split.indices(table)?;
    let train = all.select(&train_idx);
    let test = all.select(&test_idx);

    let basis = eigenpairs(domain)?;
    let (kernel_rr, noise_rr) = match &cfg.optimizer {
        Some(pso) => {
            check_bounds(pso, exact_param_count(kernel), "reduced-rank GP")?;
            // The reduced-rank likelihood is that of an exact GP with the
            // approximate kernel.
            let res = pso_minimize(
                |p| match exact_params(kernel, p)
                    .and_then(|(k, nv)| Ok((ReducedRankKernel::new(basis.clone(), &k)?, nv)))
                {
                    Ok((k, nv)) => negative_lml(&train, k, &MeanFunctionSpec::Zero, nv),
                    Err(_) => f64::INFINITY,
                },
                pso,
            )?;
            if !res.best_value.is_finite() {
                return Err(BenchError::Numerical("no finite likelihood inside the bounds".into()));
            }
            exact_params(kernel, &res.best_params)?
        }
        None => (kernel.clone(), noise_var),
    };
    let model = fit_reduced(&train, domain, &kernel_rr, noise_rr)?;
    let (mean, var) = model.predict(test.x())?;
    let pred = Prediction {
        mean,
        variance: var,
        covariance: None,
    };
    let truth = test.y().as_slice();
    let lml = fit_exact(
        &train,
        ReducedRankKernel::new(basis, &kernel_rr)?,
        MeanFunctionSpec::Zero,
        noise_rr,
    )
    .map(|m| m.log_marginal_likelihood())
    .ok();

    let mut metrics = MetricsReport::new("reduced_rank");
    metrics.nmse_percent = Some(nmse(truth, pred.mean.as_slice())?);
    metrics.log_marginal_likelihood = lml;
    metrics.coverage_percent = Some(coverage_metric(&train, &test)?);
    metrics.n_train = train.len();
    metrics.n_test = test.len();
    metrics.hyperparameters = kernel_hyperparameters(&kernel_rr, noise_rr);
    metrics.squared_errors = squared_errors(truth, pred.mean.as_slice());
    if compare_full {
        let (kf, nf) = match &cfg.optimizer {
            Some(pso) => {
                let (k, nv, _) = optimize_exact(&train, kernel, &MeanFunctionSpec::Zero, pso)?;
                (k, nv)
            }
            None => (kernel.clone(), noise_var),
        };
        let full = fit_exact(&train, kf, MeanFunctionSpec::Zero, nf)?;
        metrics.full_gp_nmse_percent = Some(nmse(truth, full.predict_mean(test.x())?.as_slice())?);
    }
    Ok(RunArtifacts {
        metrics,
        predictions: prediction_table(&test_idx, truth, &pred)?,
        model: Some(SavedModel::ReducedRank {
            inputs: inputs.to_vec(),
            output: output.to_string(),
            domain: domain.clone(),
            kernel: kernel_rr,
            noise_var: noise_rr,
            x: matrix_rows(train.x()),
            y: train.y().iter().copied().collect(),
        }),
        extra: Vec::new(),
    })
}

fn uniform_dt(time: &[f64]) -> Result<f64> {
    if time.len() < 2 {
        return Err(BenchError::Data("need at least two samples".into()));
    }
    let dt = time[1] - time[0];
    let ok = dt > 0.0
        && time
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-6 * dt.abs().max(1.0));
    if !ok {
        return Err(BenchError::Data("time column is not uniformly sampled".into()));
    }
    Ok(dt)
}

#[allow(clippy::too_many_arguments)]
fn run_latent_force(
    cfg: &ExperimentConfig,
    table: &Table,
    structure: &ChainStructure,
    observations: &[String],
    truth_force: Option<&str>,
    order: greybox_core::latent_force::MaternOrder,
    sigma: f64,
    lengthscale: f64,
    initial_structural_var: f64,
) -> Result<RunArtifacts> {
    let mut s = StructuralModel::chain(
        &structure.masses,
        &structure.dampings,
        &structure.stiffnesses,
        structure.force_dof,
        structure.channels.clone(),
    )?;
    if observations.len() != s.channels.len() {
        return Err(BenchError::Config(format!(
            "{} observation columns for {} channels",
            observations.len(),
            s.channels.len()
        )));
    }
    let dt = uniform_dt(table.time())?;
    let obs = input_matrix(table, observations)?;

    let (prior, hyper) = match &cfg.optimizer {
        Some(pso) => {
            let fit = optimize_force_prior(&s, &obs, order, dt, initial_structural_var, pso)?;
            if let Some(nv) = fit.noise_var {
                for ch in &mut s.channels {
                    ch.noise_var = nv;
                }
            }
            let h = fit.search.best_params.clone();
            (fit.prior, h)
        }
        None => (matern_to_ss(order, sigma, lengthscale)?, vec![sigma, lengthscale]),
    };
    let res = estimate_force(&s, &obs, &prior, dt, initial_structural_var)?;
    let n = table.len();

    let mut metrics = MetricsReport::new("latent_force");
    metrics.log_marginal_likelihood = Some(res.log_likelihood);
    metrics.n_train = n;
    metrics.n_test = n;
    metrics.hyperparameters = hyper;
    let truth: Vec<f64> = match truth_force {
        Some(name) => {
            let t = table.column(name)?.to_vec();
            let score = nmse(&t, &res.force_mean)?;
            metrics.nmse_percent = Some(score);
            metrics.force_nmse_percent = Some(score);
            metrics.squared_errors = squared_errors(&t, &res.force_mean);
            t
        }
        None => vec![f64::NAN; n],
    };
    let pred = Prediction {
        mean: DVector::from_vec(res.force_mean.clone()),
        variance: DVector::from_vec(res.force_variance.clone()),
        covariance: None,
    };
    let index: Vec<usize> = (0..n).collect();
    Ok(RunArtifacts {
        metrics,
        predictions: prediction_table(&index, &truth, &pred)?,
        model: None,
        extra: Vec::new(),
    })
}

/// Run an experiment in memory. Relative data paths resolve against `base`.
pub fn run(cfg: &ExperimentConfig, base: &Path) -> Result<RunArtifacts> {
    let start = Instant::now();
    let table = cfg.data.load(base)?;
    let mut out = match &cfg.task {
        TaskSpec::ExactGp {
            inputs,
            output,
            kernel,
            mean,
            noise_var,
        } => run_exact(cfg, &table, inputs, output, kernel, mean, *noise_var)?,
        TaskSpec::Narx {
            inputs,
            output,
            lags,
            kernel,
            noise_var,
            prediction,
            coverage_study,
        } => run_narx(
            cfg,
            &table,
            inputs,
            output,
            lags,
            kernel,
            *noise_var,
            *prediction,
            coverage_study.as_ref(),
        )?,
        TaskSpec::ReducedRank {
            inputs,
            output,
            domain,
            kernel,
            noise_var,
            compare_full,
        } => run_reduced(cfg, &table, inputs, output, domain, kernel, *noise_var, *compare_full)?,
        TaskSpec::LatentForce {
            structure,
            observations,
            truth_force,
            order,
            sigma,
            lengthscale,
            initial_structural_var,
        } => run_latent_force(
            cfg,
            &table,
            structure,
            observations,
            truth_force.as_deref(),
            *order,
            *sigma,
            *lengthscale,
            *initial_structural_var,
        )?,
    };
    out.metrics.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(out)
}

/// Write `predictions.csv`, `metrics.json`, `config.json`, `model.json` and
/// any extra tables into `dir`, each atomically.
pub fn write_artifacts(cfg: &ExperimentConfig, out: &RunArtifacts, dir: &Path) -> Result<()> {
    out.predictions.write_csv(&dir.join("predictions.csv"))?;
    for (name, table) in &out.extra {
        table.write_csv(&dir.join(format!("{name}.csv")))?;
    }
    if let Some(model) = &out.model {
        write_json(&dir.join("model.json"), model)?;
    }
    write_json(&dir.join("config.json"), cfg)?;
    // Last, so its presence marks a complete run.
    write_json(&dir.join("metrics.json"), &out.metrics)
}

/// Load, run and write. Returns the output directory and the metrics.
pub fn run_config_file(path: &Path) -> Result<(PathBuf, MetricsReport)> {
    let cfg = ExperimentConfig::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let out = run(&cfg, base)?;
    let dir = cfg.output_path();
    write_artifacts(&cfg, &out, &dir)?;
    Ok((dir, out.metrics))
}

/// Refit a saved model and predict on `table`.
pub fn predict_saved(model: &SavedModel, table: &Table) -> Result<Table> {
    match model {
        SavedModel::ExactGp {
            inputs,
            output,
            kernel,
            mean,
            noise_var,
            x,
            y,
        } => {
            let data = Dataset::new(rows_matrix(x)?, DVector::from_vec(y.clone()))?;
            let gp = fit_exact(&data, kernel.clone(), mean.clone(), *noise_var)?;
            let pred = gp.predict(&input_matrix(table, inputs)?)?;
            let truth = table.column(output).map(<[f64]>::to_vec).unwrap_or_else(|_| vec![f64::NAN; table.len()]);
            prediction_table(&(0..table.len()).collect::<Vec<_>>(), &truth, &pred)
        }
        SavedModel::ReducedRank {
            inputs,
            output,
            domain,
            kernel,
            noise_var,
            x,
            y,
        } => {
            let data = Dataset::new(rows_matrix(x)?, DVector::from_vec(y.clone()))?;
            let rr = fit_reduced(&data, domain, kernel, *noise_var)?;
            let (mean, variance) = rr.predict(&input_matrix(table, inputs)?)?;
            let pred = Prediction {
                mean,
                variance,
                covariance: None,
            };
            let truth = table.column(output).map(<[f64]>::to_vec).unwrap_or_else(|_| vec![f64::NAN; table.len()]);
            prediction_table(&(0..table.len()).collect::<Vec<_>>(), &truth, &pred)
        }
        SavedModel::Narx {
            inputs,
            output,
            config,
            kernel,
            noise_var,
            dt,
            u,
            y,
        } => {
            let train = SequenceData::new(rows_matrix(u)?, DVector::from_vec(y.clone()), *dt)?;
            let model = fit_narx(&train, config, kernel.clone(), *noise_var)?;
            let seq = narx_sequence(table, inputs, output)?;
            let first = config.first_index();
            let pred = model.predict_osa(&seq)?;
            let truth = &seq.y().as_slice()[first..];
            prediction_table(&(first..seq.len()).collect::<Vec<_>>(), truth, &pred)
        }
    }
}
