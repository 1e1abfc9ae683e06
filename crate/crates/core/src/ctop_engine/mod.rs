//! A lightweight CTOP: slots from planned rates, greedy trajectory-option
//! assignment, and a per-scenario queueing model that prices the airborne
//! holding the allocation leaves behind. [`evaluate_rates`] chains the three
//! and is the objective the optimizer calls.

mod allocate;
mod flow;
mod slots;

pub use allocate::{
    allocate_tos, best_quote, determine_inclusion, quote_option, read_allocation_csv, AllocationResult, AllocationRow,
    Assignment, Inclusion, Program, Quote,
};
pub use flow::{flow_simulate, scheduled_path_demand, simulate_path_demand, FlowSimResult};
pub use slots::{create_slots, slot_offsets, Slot, SlotRef, SlotState, SlotTable};

use crate::lp_solver::SolverError;
use crate::network::{Instance, NetworkError, PERIOD_SECONDS};
use crate::rates::RatePlan;
use crate::stoch_models::StochError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("no slot left for flight {flight} within the horizon")]
    Overflow { flight: String },
    #[error("flow simulation infeasible in scenario {scenario}; the horizon needs more padding")]
    FlowInfeasible { scenario: String },
    #[error("allocation names unknown flight {0}")]
    UnknownFlight(String),
    #[error("allocation csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Stoch(#[from] StochError),
}

/// Cost of a rate plan in ground-delay units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostComponents {
    /// Relative trajectory cost, charged at `c_g` per 15 minutes.
    pub reroute: f64,
    /// Ground delay, `c_g` per period.
    pub ground: f64,
    /// Expected airborne holding, `c_a` per period.
    pub air: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub allocation: AllocationResult,
    pub flow: FlowSimResult,
    pub cost: CostComponents,
}

/// Slots, allocation and flow simulation for one rate plan. Only non-exempt
/// flights are charged.
pub fn evaluate_rates(rates: &RatePlan, instance: &Instance) -> Result<Evaluation, EngineError> {
    let program = Program::for_instance(instance);
    let slots = create_slots(rates, &instance.horizon);
    let allocation = allocate_tos(&program, &instance.flights, slots)?;
    let flow = flow_simulate(&allocation, instance)?;
    let cg = instance.costs.ground;
    let period_min = (PERIOD_SECONDS / 60) as f64;
    let reroute = cg * allocation.total_relative_cost() / period_min;
    let ground = cg * allocation.total_ground_delay_s() as f64 / PERIOD_SECONDS as f64;
    let air = flow.expected_air_cost;
    Ok(Evaluation { cost: CostComponents { reroute, ground, air, total: reroute + ground + air }, allocation, flow })
}
