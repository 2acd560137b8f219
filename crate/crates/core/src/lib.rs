//! Bayesian adaptation on networks with strong and weak links.
//!
//! Agents repeatedly pick one of two actions whose relative payoff flips at
//! random times. Strong links carry information instantly and reward
//! coordination; weak links carry information only when activated and then
//! need time to recover. [`engine`] simulates the dynamics, [`amc`] solves the
//! embedded chain exactly on small graphs and [`welfare`] holds the closed-form
//! bounds and comparison reports.

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod amc;
pub mod engine;
pub mod equilibrium;
pub mod error;
pub mod linalg;
pub mod network;
pub mod scalar;
pub mod welfare;

pub use amc::{AmcModel, AmcOptions, AmcState};
pub use engine::{estimate_welfare, run_epochs, SimParams, Simulation};
pub use equilibrium::{best_response, cascade, Action, BeliefState};
pub use error::{Error, Result};
pub use network::{
    build_network, classify_regime, gen_clique, gen_island, gen_star, NetworkError, NetworkSpec, Regime,
};
pub use scalar::Real;
pub use welfare::{
    bound_discount, bound_island, bound_no_weak, compare_networks, two_node_comparison, Budget, ComparisonReport,
    Method, WelfareEstimate,
};

pub type SimParamsF64 = SimParams<f64>;
pub type SimParamsF32 = SimParams<f32>;
pub type AmcModelF64 = AmcModel<f64>;
pub type AmcModelF32 = AmcModel<f32>;
pub type WelfareEstimateF64 = WelfareEstimate<f64>;
pub type WelfareEstimateF32 = WelfareEstimate<f32>;
pub type BeliefStateF64 = BeliefState<f64>;
pub type BeliefStateF32 = BeliefState<f32>;
