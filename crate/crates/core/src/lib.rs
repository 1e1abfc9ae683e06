//! Planned acceptance rates for multi-resource collaborative trajectory
//! options programs.
//!
//! The crate is split along the planning pipeline:
//!
//! - [`network`]: instances (FCA/PCA network, paths, scenario tree,
//!   capacities, flights) and demand aggregation.
//! - [`lp_solver`]: the LP/MIP model container and a small exact solver.
//! - [`stoch_models`]: stochastic rate-planning programs and rate/cost
//!   extraction.
//! - [`ctop_engine`]: slot creation, trajectory-option allocation and the
//!   flow simulation that prices airborne holding.
//! - [`sbo`]: seed heuristics and pattern search over rate plans.

pub mod ctop_engine;
pub mod lp_solver;
pub mod network;
pub mod rates;
pub mod sbo;
pub mod stoch_models;

#[cfg(test)]
mod test_util;
