//! Grey-box Gaussian process regression for structural health monitoring.
//!
//! The crate combines data-driven Gaussian process (GP) models with physics
//! knowledge in several ways:
//!
//! * [`gp`] – exact GP regression with optional physics-derived prior means.
//! * [`physics`] – oscillator-derived covariance, Morison's wave-force law and
//!   kernel spectral densities.
//! * [`narx`] – dynamic GP-NARX models with residual and input-augmentation
//!   grey-box modes.
//! * [`reduced_rank`] – boundary-constrained GPs built from Laplacian
//!   eigenfunctions on hyper-rectangles.
//! * [`latent_force`] – state-space latent force estimation with Kalman
//!   filtering and RTS smoothing.
//! * [`optimize`] – particle-swarm hyperparameter search.

pub mod error;
pub mod gp;
pub mod kernel;
pub mod latent_force;
mod linalg;
pub mod mean;
pub mod narx;
pub mod optimize;
pub mod physics;
pub mod reduced_rank;

pub use error::{GpError, Result};
pub use gp::{fit_exact, Dataset, Prediction, TrainedGp};
pub use kernel::{build_gram, kernel_eval, Covariance, KernelSpec};
pub use mean::{MeanFunctionSpec, PhysicsMean};
