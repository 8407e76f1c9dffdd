use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn greybox(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_greybox"))
        .args(args)
        .env("GREYBOX_OUTPUT_ROOT", root)
        .output()
        .expect("binary runs")
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn stderr_line(out: &Output) -> String {
    let s = String::from_utf8_lossy(&out.stderr).trim_end().to_string();
    assert_eq!(s.lines().count(), 1, "diagnostic should be one line: {s:?}");
    assert!(s.starts_with("greybox: "));
    s
}

fn metrics_without_wall(path: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("wall_ms");
    v
}

#[test]
fn malformed_config_exits_2_and_writes_nothing() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("bad.json");
    std::fs::write(&cfg, r#"{"name": "oops", "task": {"kind": "exact_gp", "#).unwrap();
    let out = greybox(&root.path().join("runs"), &["fit", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    stderr_line(&out);
    assert!(!root.path().join("runs").exists());

    std::fs::write(&cfg, r#"{"name": "oops", "task": {"kind": "nope"}, "data": {}}"#).unwrap();
    let out = greybox(&root.path().join("runs"), &["fit", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!root.path().join("runs").exists());
}

#[test]
fn missing_data_exits_3() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"name": "m", "data": {"source": "csv", "path": "absent.csv"},
            "task": {"kind": "exact_gp", "inputs": ["t"], "output": "y", "noise_var": 0.1,
                     "kernel": {"family": "matern32", "sigma_f": 1.0, "lengthscale": 1.0}}}"#,
    )
    .unwrap();
    let out = greybox(root.path(), &["fit", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_line(&out).contains("absent.csv"));
    assert!(!root.path().join("m").exists());
}

#[test]
fn unstable_simulation_exits_4() {
    let root = tempfile::tempdir().unwrap();
    let spec = root.path().join("s.json");
    std::fs::write(
        &spec,
        r#"{"generator": "sdof", "natural_frequency_hz": 16.0, "dt": 0.5, "substeps": 1, "steps": 2000}"#,
    )
    .unwrap();
    let out = greybox(root.path(), &["generate", spec.to_str().unwrap(), "-o", root.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    stderr_line(&out);
}

#[test]
fn latent_force_rejects_other_tasks() {
    let root = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("trend.json");
    let out = greybox(root.path(), &["latent-force", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!root.path().join("trend").exists());
}

#[test]
fn trend_fit_is_deterministic() {
    let root = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("trend.json");
    let mut runs = Vec::new();
    for k in 0..2 {
        let dir = root.path().join(format!("r{k}"));
        let out = greybox(&dir, &["fit", cfg.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        for f in ["predictions.csv", "metrics.json", "config.json", "model.json"] {
            assert!(dir.join("trend").join(f).exists(), "{f}");
        }
        runs.push(dir.join("trend"));
    }
    let a = metrics_without_wall(&runs[0].join("metrics.json"));
    let b = metrics_without_wall(&runs[1].join("metrics.json"));
    assert_eq!(a, b);
    for key in ["nmse_percent", "log_marginal_likelihood", "coverage_percent"] {
        assert!(a[key].is_number(), "{key}");
    }
    assert_eq!(
        std::fs::read(runs[0].join("predictions.csv")).unwrap(),
        std::fs::read(runs[1].join("predictions.csv")).unwrap()
    );
    let header = std::fs::read_to_string(runs[0].join("predictions.csv")).unwrap();
    assert!(header.starts_with("index,truth,mean,variance"));
    // The resolved copy parses back to the same experiment.
    let resolved = std::fs::read_to_string(runs[0].join("config.json")).unwrap();
    let original = std::fs::read_to_string(&cfg).unwrap();
    assert_eq!(
        greybox_bench::ExperimentConfig::from_json(&resolved).unwrap(),
        greybox_bench::ExperimentConfig::from_json(&original).unwrap()
    );
}

#[test]
fn latent_force_report_has_force_nmse() {
    let root = tempfile::tempdir().unwrap();
    let dir = root.path();
    let cfg = dir.join("lf.json");
    // Fixed prior, short record: exercises the report, not the search.
    std::fs::write(
        &cfg,
        r#"{"name": "lf", "data": {"source": "generator", "spec": {"generator": "chain", "steps": 400}},
            "task": {"kind": "latent_force", "observations": ["disp_0", "disp_1", "disp_2"],
                     "truth_force": "force", "order": "three_halves", "sigma": 10.0, "lengthscale": 0.3,
                     "structure": {"masses": [1, 1, 1], "dampings": [0.8, 0.8, 0.8],
                                   "stiffnesses": [400, 400, 400], "force_dof": 2,
                                   "channels": [{"quantity": "displacement", "dof": 0, "noise_var": 1e-6},
                                                {"quantity": "displacement", "dof": 1, "noise_var": 1e-6},
                                                {"quantity": "displacement", "dof": 2, "noise_var": 1e-6}]}}}"#,
    )
    .unwrap();
    let out = greybox(dir, &["latent-force", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("force_nmse_percent="));
    let m = metrics_without_wall(&dir.join("lf/metrics.json"));
    let f = m["force_nmse_percent"].as_f64().unwrap();
    assert!(f.is_finite() && f < 5.0, "force nMSE {f}");
    assert!(m["log_marginal_likelihood"].is_number());
}

#[test]
fn generate_predict_eval_round_trip() {
    let root = tempfile::tempdir().unwrap();
    let dir = root.path();
    let spec = dir.join("trend_spec.json");
    std::fs::write(&spec, r#"{"generator": "trend", "seed": 5}"#).unwrap();
    let out = greybox(dir, &["generate", spec.to_str().unwrap(), "-o", dir.to_str().unwrap()]);
    assert!(out.status.success());
    let data = dir.join("trend.csv");
    assert!(data.exists());

    let cfg = dir.join("fit.json");
    std::fs::write(
        &cfg,
        r#"{"name": "fixed", "data": {"source": "csv", "path": "trend.csv"},
            "split": {"type": "fraction", "train": 0.5},
            "task": {"kind": "exact_gp", "inputs": ["temperature", "hour"], "output": "deflection",
                     "mean": {"type": "least_squares"}, "noise_var": 0.04,
                     "kernel": {"family": "squared_exponential", "sigma_f": 1.0, "lengthscales": [5.0, 4.0]}}}"#,
    )
    .unwrap();
    let out = greybox(dir, &["fit", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.join("fixed");

    let pred = dir.join("p.csv");
    let out = greybox(dir, &["predict", run.to_str().unwrap(), data.to_str().unwrap(), "-o", pred.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // eval against the full series aligns on the index column.
    let report = dir.join("eval.json");
    let out = greybox(
        dir,
        &["eval", run.join("predictions.csv").to_str().unwrap(), data.to_str().unwrap(),
          "--column", "deflection", "-o", report.to_str().unwrap()],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let e = metrics_without_wall(&report);
    let m = metrics_without_wall(&run.join("metrics.json"));
    let (a, b) = (e["nmse_percent"].as_f64().unwrap(), m["nmse_percent"].as_f64().unwrap());
    assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} vs {b}");

    let out = greybox(dir, &["eval", pred.to_str().unwrap(), data.to_str().unwrap(), "--column", "nope"]);
    assert_eq!(out.status.code(), Some(3));
}
