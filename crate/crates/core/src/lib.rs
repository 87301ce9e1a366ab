//! Numerical core for the two-population Wolbachia invasion model.
//!
//! The model tracks wild adults `N` and Wolbachia-carrying adults `W`:
//!
//! ```text
//! dN/dt = rho_n N (N / (N + W)) - alpha_n N - beta_n N (N + W)
//! dW/dt = rho_w W - alpha_w W - beta_w W (N + W)
//! ```
//!
//! Everything here is pure and allocation-light, and builds without `std`.
//! File formats, the CLI and the HTTP service live in the `wolbachia` crate.
//!
//! Module map:
//!
//! * [`model`]: parameters, states, vector field, Jacobian, cone order.
//! * [`equilibria`]: closed-form steady states and their stability.
//! * [`ode`]: adaptive Dormand–Prince integration and basin classification.
//! * [`threshold`]: the separatrix through the saddle, its unstable manifold
//!   and minimal viable release sizes.
//! * [`planner`]: impulsive periodic releases and release-size search.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod equilibria;
mod error;
pub mod interp;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod planner;
pub mod threshold;

pub use equilibria::{
    classify_stability, equilibria, Classification, Eigenvalues, EquilibriumSet,
    EquilibriumStability, StabilityReport,
};
pub use error::{Error, Result};
pub use linalg::Matrix2;
pub use model::{
    jacobian, order_leq_cone, order_lt_cone, order_strong_cone, validate_params, vector_field,
    Condition, ModelParameters, PopulationState, ValidationReport,
};
pub use ode::{
    classify_basin, integrate, BasinLabel, IntegrationOptions, Sample, TerminalReason, Trajectory,
};
pub use planner::{
    minimal_release_size, simulate_impulsive, simulate_releases, tradeoff_table, ImpulsiveTrajectory,
    JumpEvent, Outcome, PlanResult, Release, ReleasePlanner, ReleaseSchedule, StopRule, TradeoffCell,
};
pub use threshold::{
    minimal_viable_w, separatrix_backward, separatrix_bisection, unstable_manifold, ManifoldPair,
    Provenance, SeparatrixCurve,
};
