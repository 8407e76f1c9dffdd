//! Latent force estimation in state-space form.
//!
//! A Matérn GP prior on an unmeasured force is written as a linear SDE,
//! appended to the first-order form of a linear structural model, discretized
//! exactly and then inferred jointly with the structural states by Kalman
//! filtering and RTS smoothing.

mod estimate;
mod filter;
mod state_space;
mod structural;

pub use estimate::{estimate_force, optimize_force_prior, ForceFit};
pub use filter::{kalman_filter, rts_smoother, FilterResult, SmootherResult};
pub use state_space::{
    discretize, matern_to_ss, solve_lyapunov, DiscreteModel, ForcePrior, MaternOrder,
    StateSpaceModel,
};
pub use structural::{augment, ObservationChannel, Quantity, StructuralModel};
