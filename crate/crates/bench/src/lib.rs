//! Experiment harness for `greybox-core`: synthetic case-study generators,
//! CSV/JSON plumbing, an experiment runner and scoring.

pub mod config;
pub mod error;
pub mod experiment;
pub mod generators;
pub mod io;
pub mod metrics;
pub mod sim;

pub use config::ExperimentConfig;
pub use error::{BenchError, Result};
pub use metrics::{nmse, MetricsReport};
