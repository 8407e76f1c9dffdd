use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use greybox_bench::config::TaskSpec;
use greybox_bench::experiment::{predict_saved, run, write_artifacts, SavedModel};
use greybox_bench::generators::GeneratorSpec;
use greybox_bench::io::{write_json, Table};
use greybox_bench::{nmse, BenchError, ExperimentConfig, MetricsReport, Result};

#[derive(Parser)]
#[command(name = "greybox", version, about = "Grey-box GP experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset as `<dir>/<generator>.csv`.
    Generate {
        spec: PathBuf,
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
    },
    /// Run an experiment config and write its artifacts.
    Fit { config: PathBuf },
    /// Refit a saved model and predict on new data.
    Predict {
        model_dir: PathBuf,
        data: PathBuf,
        /// Defaults to `<model-dir>/predict.csv`.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Score a predictions CSV against a truth CSV.
    Eval {
        predictions: PathBuf,
        truth: PathBuf,
        /// Truth column; `truth` by default.
        #[arg(long, default_value = "truth")]
        column: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run a latent force config.
    LatentForce { config: PathBuf },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))
}

fn fit(path: &Path, require_latent: bool) -> Result<()> {
    // Parse and validate before anything touches the output directory.
    let cfg = ExperimentConfig::load(path)?;
    if require_latent && !matches!(cfg.task, TaskSpec::LatentForce { .. }) {
        return Err(BenchError::Config(format!(
            "latent-force needs a latent_force task, got {}",
            cfg.task.kind()
        )));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let out = run(&cfg, base)?;
    let dir = cfg.output_path();
    write_artifacts(&cfg, &out, &dir)?;
    let m = &out.metrics;
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    let mut line = format!(
        "{}: nmse_percent={} log_marginal_likelihood={} coverage_percent={}",
        dir.display(),
        fmt(m.nmse_percent),
        fmt(m.log_marginal_likelihood),
        fmt(m.coverage_percent)
    );
    if let Some(f) = m.force_nmse_percent {
        line += &format!(" force_nmse_percent={f:.4}");
    }
    println!("{line} wall_ms={:.0}", m.wall_ms);
    Ok(())
}

fn eval(pred: &Path, truth: &Path, column: &str, out: Option<&Path>) -> Result<()> {
    let p = Table::read_csv(pred)?;
    let t = Table::read_csv(truth)?;
    let mean = p.column("mean")?;
    let reference = t.column(column)?;
    // Align on the prediction index when the truth file is the full series.
    let truth: Vec<f64> = if reference.len() == mean.len() {
        reference.to_vec()
    } else {
        let index = p.column("index")?;
        index
            .iter()
            .map(|&i| {
                reference.get(i as usize).copied().ok_or_else(|| {
                    BenchError::Data(format!("prediction index {i} outside truth file"))
                })
            })
            .collect::<Result<_>>()?
    };
    let mut report = MetricsReport::new("eval");
    report.nmse_percent = Some(nmse(&truth, mean)?);
    report.n_test = truth.len();
    if let Ok(var) = p.column("variance") {
        // Share of truths inside the 95% predictive band.
        let inside = truth
            .iter()
            .zip(mean)
            .zip(var)
            .filter(|((y, m), v)| (*y - *m).abs() <= 1.96 * v.max(0.0).sqrt())
            .count();
        report.coverage_percent = Some(100.0 * inside as f64 / truth.len() as f64);
    }
    let text = serde_json::to_string_pretty(&report).map_err(|e| BenchError::Io(e.to_string()))?;
    match out {
        Some(path) => write_json(path, &report)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { spec, out } => {
            let spec: GeneratorSpec = read_json(&spec)?;
            let table = spec.generate()?;
            let path = out.join(format!("{}.csv", spec.name()));
            table.write_csv(&path)?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Fit { config } => fit(&config, false),
        Command::LatentForce { config } => fit(&config, true),
        Command::Predict {
            model_dir,
            data,
            out,
        } => {
            let model: SavedModel = read_json(&model_dir.join("model.json"))?;
            let table = Table::read_csv(&data)?;
            let pred = predict_saved(&model, &table)?;
            let path = out.unwrap_or_else(|| model_dir.join("predict.csv"));
            pred.write_csv(&path)?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Eval {
            predictions,
            truth,
            column,
            out,
        } => eval(&predictions, &truth, &column, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("greybox: {msg}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
