//! Experiment configuration (JSON).

use std::path::{Path, PathBuf};

use greybox_core::latent_force::{MaternOrder, ObservationChannel};
use greybox_core::narx::NarxConfig;
use greybox_core::optimize::PsoConfig;
use greybox_core::physics::MorisonParams;
use greybox_core::reduced_rank::DomainSpec;
use greybox_core::{KernelSpec, MeanFunctionSpec};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::generators::GeneratorSpec;
use crate::io::Table;

/// Environment variable naming the root for relative output directories.
pub const OUTPUT_ROOT_VAR: &str = "GREYBOX_OUTPUT_ROOT";
const DEFAULT_OUTPUT_ROOT: &str = "runs";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub task: TaskSpec,
    pub data: DataSource,
    #[serde(default)]
    pub split: SplitSpec,
    /// Hyperparameter search; fixed hyperparameters from `task` when absent.
    #[serde(default)]
    pub optimizer: Option<PsoConfig>,
    /// Relative paths resolve against `$GREYBOX_OUTPUT_ROOT` (default
    /// `runs`). Defaults to `name`.
    #[serde(default)]
    pub output_dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskSpec {
    /// Exact GP regression of `output` on `inputs`. Optimized parameter
    /// order: SE `[sigma_f, l.., sigma_n]`, Matérn `[sigma_f, l, sigma_n]`,
    /// oscillator `[zeta, omega_n, sigma2, sigma_n]`.
    ExactGp {
        inputs: Vec<String>,
        output: String,
        kernel: KernelSpec,
        #[serde(default)]
        mean: MeanChoice,
        noise_var: f64,
    },
    /// GP-NARX with input channels `inputs` (velocity and acceleration first
    /// for the Morison modes). Optimized parameters: SE
    /// `[sigma_f, l_input, l_output, sigma_n]`, Matérn `[sigma_f, l, sigma_n]`.
    Narx {
        inputs: Vec<String>,
        output: String,
        lags: NarxConfig,
        kernel: KernelSpec,
        noise_var: f64,
        #[serde(default)]
        prediction: NarxPrediction,
        #[serde(default)]
        coverage_study: Option<CoverageStudySpec>,
    },
    /// Reduced-rank GP on a bounded domain; parameters as for `exact_gp`.
    ReducedRank {
        inputs: Vec<String>,
        output: String,
        domain: DomainSpec,
        kernel: KernelSpec,
        noise_var: f64,
        /// Also fit an exact GP with the same kernel family for comparison.
        #[serde(default)]
        compare_full: bool,
    },
    /// Latent force estimation on a chain structure. Optimized parameters:
    /// `[sigma, lengthscale]` or `[sigma, lengthscale, noise_var]`.
    LatentForce {
        structure: ChainStructure,
        /// One column per structural channel, in channel order.
        observations: Vec<String>,
        #[serde(default)]
        truth_force: Option<String>,
        order: MaternOrder,
        sigma: f64,
        lengthscale: f64,
        #[serde(default = "default_initial_var")]
        initial_structural_var: f64,
    },
}

fn default_initial_var() -> f64 {
    1e-4
}

impl TaskSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            TaskSpec::ExactGp { .. } => "exact_gp",
            TaskSpec::Narx { .. } => "narx",
            TaskSpec::ReducedRank { .. } => "reduced_rank",
            TaskSpec::LatentForce { .. } => "latent_force",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MeanChoice {
    #[default]
    Zero,
    /// Linear mean fitted by least squares on the training rows.
    LeastSquares,
    Fixed { mean: MeanFunctionSpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NarxPrediction {
    #[default]
    FreeRun,
    OneStepAhead,
}

/// Compare black-box and Morison-residual NARX models trained on windows
/// chosen to cover decreasing fractions of a fixed test window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageStudySpec {
    /// Target coverage percentages.
    pub levels: Vec<f64>,
    pub train_length: usize,
    /// `[start, end)` sample range of the test window.
    pub test: [usize; 2],
    #[serde(default = "default_stride")]
    pub stride: usize,
    pub morison: MorisonParams,
}

fn default_stride() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStructure {
    pub masses: Vec<f64>,
    pub dampings: Vec<f64>,
    pub stiffnesses: Vec<f64>,
    pub force_dof: usize,
    pub channels: Vec<ObservationChannel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Generator { spec: GeneratorSpec },
    /// Relative paths resolve against the config file's directory.
    Csv { path: String },
}

impl DataSource {
    pub fn load(&self, base: &Path) -> Result<Table> {
        match self {
            DataSource::Generator { spec } => spec.generate(),
            DataSource::Csv { path } => Table::read_csv(&base.join(path)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SplitSpec {
    /// Train and test on every row.
    #[default]
    All,
    /// Leading fraction for training, the rest for testing.
    Fraction { train: f64 },
    /// Rows `offset, offset + n, ..` for training, the rest for testing.
    EveryNth {
        n: usize,
        #[serde(default)]
        offset: usize,
    },
    /// `[start, end)` row ranges.
    Ranges { train: [usize; 2], test: [usize; 2] },
    /// Rows where the named column is nonzero train, the rest test.
    Column { name: String },
}

impl SplitSpec {
    pub fn indices(&self, table: &Table) -> Result<(Vec<usize>, Vec<usize>)> {
        let n = table.len();
        let (train, test): (Vec<usize>, Vec<usize>) = match self {
            SplitSpec::All => ((0..n).collect(), (0..n).collect()),
            SplitSpec::Fraction { train } => {
                if !(*train > 0.0 && *train < 1.0) {
                    return Err(BenchError::Config(format!("train fraction {train} not in (0, 1)")));
                }
                let k = (train * n as f64).round() as usize;
                ((0..k).collect(), (k..n).collect())
            }
            SplitSpec::EveryNth { n: step, offset } => {
                if *step < 2 {
                    return Err(BenchError::Config("every_nth needs n >= 2".into()));
                }
                (0..n).partition(|i| i % step == offset % step)
            }
            SplitSpec::Ranges { train, test } => {
                for r in [train, test] {
                    if r[0] >= r[1] || r[1] > n {
                        return Err(BenchError::Config(format!(
                            "range {r:?} invalid for {n} rows"
                        )));
                    }
                }
                ((train[0]..train[1]).collect(), (test[0]..test[1]).collect())
            }
            SplitSpec::Column { name } => {
                let flag = table.column(name)?;
                (0..n).partition(|&i| flag[i] != 0.0)
            }
        };
        if train.is_empty() || test.is_empty() {
            return Err(BenchError::Data("split leaves an empty train or test set".into()));
        }
        Ok((train, test))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            BenchError::Config(m) => BenchError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn output_path(&self) -> PathBuf {
        let dir = PathBuf::from(self.output_dir.as_deref().unwrap_or(&self.name));
        if dir.is_absolute() {
            dir
        } else {
            let root = std::env::var_os(OUTPUT_ROOT_VAR)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT));
            root.join(dir)
        }
    }
}
