mod common;

use common::*;
use greybox_core::narx::{
    build_lag_matrix, coverage_metric, fit_narx, NarxConfig, NarxMode, SequenceData,
};
use greybox_core::physics::{morison_force, MorisonParams};
use greybox_core::{fit_exact, Dataset, KernelSpec, MeanFunctionSpec};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn ar1(t: usize, y0: f64) -> SequenceData {
    let mut y = vec![y0];
    for i in 1..t {
        y.push(0.5 * y[i - 1]);
    }
    SequenceData::new(DMatrix::zeros(t, 1), DVector::from_vec(y), 0.1).unwrap()
}

fn wave_sequence(seed: u64, t: usize) -> (SequenceData, MorisonParams) {
    let mut r = rng(seed);
    let morison = MorisonParams {
        drag: 0.8,
        inertia: 1.6,
    };
    let dt = 0.1;
    let mut u = DMatrix::zeros(t, 2);
    let mut y = DVector::zeros(t);
    for i in 0..t {
        let s = i as f64 * dt;
        let vel = (1.3 * s).sin() + 0.4 * (2.9 * s + 0.3).sin();
        let acc = 1.3 * (1.3 * s).cos() + 0.4 * 2.9 * (2.9 * s + 0.3).cos();
        u[(i, 0)] = vel;
        u[(i, 1)] = acc;
        y[i] = morison_force(&morison, vel, acc) + 0.2 * vel.powi(3) + 0.01 * r.random_range(-1.0..1.0);
    }
    (SequenceData::new(u, y, dt).unwrap(), morison)
}

#[test]
fn ar1_one_step_ahead_matches_recursion() {
    let seq = ar1(20, 8.0);
    let cfg = NarxConfig::new(0, 1, NarxMode::BlackBox);
    let model = fit_narx(&seq, &cfg, KernelSpec::squared_exponential(4.0, 3.0), 0.0).unwrap();
    let pred = model.predict_osa(&seq).unwrap();
    for (i, m) in pred.mean.iter().enumerate() {
        let expected = 0.5 * seq.y()[i];
        assert!((m - expected).abs() < 1e-3, "{m} vs {expected}");
    }
}

#[test]
fn ar1_free_run_is_geometric() {
    let seq = ar1(20, 8.0);
    let cfg = NarxConfig::new(0, 1, NarxMode::BlackBox);
    let model = fit_narx(&seq, &cfg, KernelSpec::squared_exponential(4.0, 3.0), 0.0).unwrap();
    let traj = model.simulate_free_run(&DMatrix::zeros(20, 1), &[8.0]).unwrap();
    assert_eq!(traj.len(), 20);
    let full = model
        .simulate_free_run_with_variance(&DMatrix::zeros(20, 1), &[8.0])
        .unwrap();
    assert_eq!(full.mean.as_slice(), traj.as_slice());
    assert!(full.variance.iter().all(|v| *v >= 0.0));
    let mut expected = 8.0;
    for v in traj {
        expected *= 0.5;
        assert!((v - expected).abs() < 1e-2, "{v} vs {expected}");
    }
}

#[test]
fn free_run_tracks_one_step_ahead_on_exact_model() {
    // Linear ARX, noise free: y_t = 0.6 y_{t-1} + 0.3 u_t.
    let t = 60;
    let u: Vec<f64> = (0..t).map(|i| (0.37 * i as f64).sin()).collect();
    let mut y = vec![0.0; t];
    for i in 1..t {
        y[i] = 0.6 * y[i - 1] + 0.3 * u[i];
    }
    let seq = SequenceData::new(
        DMatrix::from_column_slice(t, 1, &u),
        DVector::from_vec(y.clone()),
        0.1,
    )
    .unwrap();
    let cfg = NarxConfig::new(0, 1, NarxMode::BlackBox);
    let model = fit_narx(&seq, &cfg, KernelSpec::squared_exponential(1.0, 2.0), 1e-10).unwrap();
    let osa = model.predict_osa(&seq).unwrap();
    let window = 21;
    let free = model
        .simulate_free_run(&DMatrix::from_column_slice(window, 1, &u[..window]), &[0.0])
        .unwrap();
    // free[k] predicts y_k; osa[k - 1] predicts y_k.
    for k in 1..window {
        assert!((free[k] - osa.mean[k - 1]).abs() < 1e-2);
    }
}

#[test]
fn zero_response_model_free_runs_to_zero() {
    let t = 12;
    let seq = SequenceData::new(DMatrix::from_fn(t, 1, |i, _| i as f64), DVector::zeros(t), 0.5).unwrap();
    let cfg = NarxConfig::new(2, 2, NarxMode::BlackBox);
    let model = fit_narx(&seq, &cfg, KernelSpec::squared_exponential(1.0, 1.0), 0.01).unwrap();
    assert!(model.gp().alpha().iter().all(|a| *a == 0.0));
    let traj = model.simulate_free_run(seq.u(), &[0.0, 0.0]).unwrap();
    assert_eq!(traj.len(), t - 2);
    assert!(traj.iter().all(|v| *v == 0.0));
}

#[test]
fn osa_is_gp_prediction_on_lag_rows() {
    let (seq, morison) = wave_sequence(3, 80);
    for mode in [
        NarxMode::BlackBox,
        NarxMode::ResidualMean { morison },
        NarxMode::InputAugmentation { morison },
    ] {
        let cfg = NarxConfig::new(2, 2, mode);
        let kernel = KernelSpec::squared_exponential(1.0, 1.5);
        let model = fit_narx(&seq, &cfg, kernel.clone(), 0.01).unwrap();
        let lagged = build_lag_matrix(&seq, &cfg).unwrap();
        let direct = fit_exact(&lagged, kernel, model.gp().mean_function().clone(), 0.01).unwrap();
        let a = model.predict_osa(&seq).unwrap();
        let b = direct.predict(lagged.x()).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.variance, b.variance);
    }
}

#[test]
fn residual_mode_equals_manual_subtraction() {
    let (seq, morison) = wave_sequence(9, 90);
    let cfg = NarxConfig::new(3, 2, NarxMode::ResidualMean { morison });
    let kernel = KernelSpec::squared_exponential(0.5, 2.0);
    let model = fit_narx(&seq, &cfg, kernel.clone(), 0.005).unwrap();

    let lagged = build_lag_matrix(&seq, &cfg).unwrap();
    let physics: Vec<f64> = lagged
        .x()
        .row_iter()
        .map(|r| morison_force(&morison, r[0], r[1]))
        .collect();
    let residual = lagged.y() - DVector::from_vec(physics.clone());
    let zero = fit_exact(
        &Dataset::new(lagged.x().clone(), residual).unwrap(),
        kernel,
        MeanFunctionSpec::Zero,
        0.005,
    )
    .unwrap();
    let a = model.predict_osa(&seq).unwrap();
    let b = zero.predict(lagged.x()).unwrap();
    for i in 0..physics.len() {
        assert_eq!(a.mean[i], b.mean[i] + physics[i]);
        assert_eq!(a.variance[i], b.variance[i]);
    }
}

#[test]
fn residual_mode_with_exact_physics_has_zero_weights() {
    let t = 30;
    let morison = MorisonParams {
        drag: 1.1,
        inertia: 2.0,
    };
    let u = DMatrix::from_fn(t, 2, |i, j| ((i + 3 * j) as f64 * 0.4).sin());
    let y = DVector::from_fn(t, |i, _| morison_force(&morison, u[(i, 0)], u[(i, 1)]));
    let seq = SequenceData::new(u, y.clone(), 0.2).unwrap();
    let model = fit_narx(
        &seq,
        &NarxConfig::new(1, 1, NarxMode::ResidualMean { morison }),
        KernelSpec::squared_exponential(1.0, 1.0),
        0.01,
    )
    .unwrap();
    assert!(model.gp().alpha().iter().all(|a| *a == 0.0));
    let pred = model.predict_osa(&seq).unwrap();
    for (i, m) in pred.mean.iter().enumerate() {
        assert_eq!(*m, y[i + 1]);
    }
}

#[test]
fn training_interpolation_noise_free() {
    let (seq, _) = wave_sequence(5, 60);
    let cfg = NarxConfig::new(2, 2, NarxMode::BlackBox);
    let model = fit_narx(&seq, &cfg, KernelSpec::squared_exponential(1.0, 1.0), 0.0).unwrap();
    let pred = model.predict_osa(&seq).unwrap();
    let truth = &seq.y().as_slice()[2..];
    assert!(nmse(truth, pred.mean.as_slice()) <= 0.1);
}

#[test]
fn coverage_hand_count() {
    let train = Dataset::from_columns(&[0.0, 1.0], &[0.0, 0.0]).unwrap();
    let test = Dataset::from_columns(&[0.5, 1.5, -0.5, 0.2], &[0.0; 4]).unwrap();
    assert_eq!(coverage_metric(&train, &test).unwrap(), 50.0);
}

proptest! {
    #[test]
    fn lag_matrix_row_count(lu in 0usize..6, ly in 1usize..6, extra in 1usize..20, channels in 1usize..3) {
        let t = lu.max(ly) + extra;
        let seq = SequenceData::new(
            DMatrix::from_fn(t, channels, |i, j| (i * 7 + j) as f64),
            DVector::from_fn(t, |i, _| i as f64),
            1.0,
        ).unwrap();
        let cfg = NarxConfig::new(lu, ly, NarxMode::BlackBox);
        let data = build_lag_matrix(&seq, &cfg).unwrap();
        prop_assert_eq!(data.len() + cfg.first_index(), t);
        prop_assert_eq!(data.dim(), (lu + 1) * channels + ly);
    }

    #[test]
    fn coverage_in_range(a in proptest::collection::vec(-3.0f64..3.0, 1..20), b in proptest::collection::vec(-3.0f64..3.0, 1..20)) {
        let train = Dataset::from_columns(&a, &a).unwrap();
        let test = Dataset::from_columns(&b, &b).unwrap();
        let c = coverage_metric(&train, &test).unwrap();
        prop_assert!((0.0..=100.0).contains(&c));
        prop_assert_eq!(coverage_metric(&train, &train).unwrap(), 100.0);
    }
}
