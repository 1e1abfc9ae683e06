//! Simulation-based optimization of FCA rates: seed heuristics (saturation
//! and capacity interpolation) followed by integer pattern search with the
//! full CTOP pipeline as the objective.

mod heuristics;
mod search;

pub use heuristics::{
    interpolate_capacity, most_congested, saturate_iterative, saturate_uniform, InterpolationMode,
    IterativeSaturation, SaturationStep, DEFAULT_SATURATION_LEVEL,
};
pub use search::{
    pattern_search, search_integer, IntSearchConfig, IntSearchOutcome, MoveKind, SearchConfig, SearchResult,
    SearchTrace, TraceEntry,
};

use crate::ctop_engine::{evaluate_rates, EngineError};
use crate::lp_solver::SolverError;
use crate::network::{Instance, NetworkError};
use crate::rates::RatePlan;
use crate::stoch_models::StochError;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SboError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Stoch(#[from] StochError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("no seed heuristics given")]
    NoSeeds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedHeuristic {
    Uniform { level: u32 },
    Iterative { max_iter: usize },
    Interpolate(InterpolationMode),
}

impl SeedHeuristic {
    pub const DEFAULTS: [SeedHeuristic; 3] = [
        SeedHeuristic::Uniform { level: DEFAULT_SATURATION_LEVEL },
        SeedHeuristic::Iterative { max_iter: 8 },
        SeedHeuristic::Interpolate(InterpolationMode::Median),
    ];

    pub fn run(&self, instance: &Instance) -> Result<RatePlan, SboError> {
        match *self {
            SeedHeuristic::Uniform { level } => saturate_uniform(instance, level),
            SeedHeuristic::Iterative { max_iter } => Ok(saturate_iterative(instance, max_iter)?.rates),
            SeedHeuristic::Interpolate(mode) => Ok(interpolate_capacity(instance, mode)),
        }
    }
}

impl fmt::Display for SeedHeuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeedHeuristic::Uniform { .. } => f.write_str("uniform"),
            SeedHeuristic::Iterative { .. } => f.write_str("iterative"),
            SeedHeuristic::Interpolate(mode) => write!(f, "{mode}"),
        }
    }
}

impl FromStr for SeedHeuristic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(SeedHeuristic::Uniform { level: DEFAULT_SATURATION_LEVEL }),
            "iterative" => Ok(SeedHeuristic::Iterative { max_iter: 8 }),
            _ => s
                .parse()
                .map(SeedHeuristic::Interpolate)
                .map_err(|_| format!("unknown seed `{s}` (expected uniform, iterative, weighted or median)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeConfig {
    /// FCAs to search; `None` picks the two most congested.
    pub subset: Option<Vec<String>>,
    /// Wall-clock budget for both phases together.
    pub time_budget: Duration,
    /// Objective evaluations allowed per seed.
    pub max_evaluations: usize,
    pub initial_step: u32,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self { subset: None, time_budget: Duration::from_secs(300), max_evaluations: 2000, initial_step: 4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedReport {
    pub seed: String,
    pub seed_rates: RatePlan,
    pub seed_cost: f64,
    pub refined: RatePlan,
    pub refined_cost: f64,
    pub evaluations: usize,
    pub seconds: f64,
    pub exhausted: bool,
    pub trace: SearchTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeReport {
    pub subset: Vec<String>,
    pub best: RatePlan,
    pub best_cost: f64,
    /// Index into `seeds` of the run that produced `best`.
    pub best_seed: usize,
    pub seeds: Vec<SeedReport>,
}

impl OptimizeReport {
    /// One row per seed: seed cost, refined cost, relative improvement,
    /// evaluations and seconds.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["Seed", "Seed Cost", "Refined Cost", "Improvement %", "Evaluations", "Seconds"])
            .expect("in-memory write");
        for s in &self.seeds {
            let gain = if s.seed_cost.is_finite() && s.seed_cost > 0.0 {
                format!("{:.2}", 100.0 * (s.seed_cost - s.refined_cost) / s.seed_cost)
            } else {
                String::new()
            };
            w.write_record([
                s.seed.clone(),
                format!("{:.2}", s.seed_cost),
                format!("{:.2}", s.refined_cost),
                gain,
                s.evaluations.to_string(),
                format!("{:.3}", s.seconds),
            ])
            .expect("in-memory write");
        }
        let body = String::from_utf8(w.into_inner().expect("flush")).expect("utf8");
        format!("# ctop-optimize v1\n{body}")
    }
}

/// The search objective: pipeline cost, or infinity when the rates cannot
/// place every flight.
pub fn rate_cost(rates: &RatePlan, instance: &Instance) -> f64 {
    evaluate_rates(rates, instance).map_or(f64::INFINITY, |e| e.cost.total)
}

/// Upper bound per searched rate: the best-case capacity of the PCAs the
/// FCA feeds when its flights reach them.
fn rate_bounds(instance: &Instance, subset: &[String], periods: std::ops::Range<usize>) -> Vec<(u32, u32)> {
    let best_case = interpolate_capacity_max(instance);
    subset
        .iter()
        .flat_map(|fca| {
            let row = best_case.row(fca).map(<[u32]>::to_vec).unwrap_or_default();
            periods.clone().map(move |t| (0, row.get(t).copied().unwrap_or(0)))
        })
        .collect()
}

fn interpolate_capacity_max(instance: &Instance) -> RatePlan {
    let t_len = instance.num_periods();
    let fcas: Vec<String> = instance.fcas().into_iter().map(String::from).collect();
    let mut plan = RatePlan::zeros(fcas.clone(), t_len);
    for (fi, fca) in fcas.iter().enumerate() {
        for t in 0..t_len {
            plan.rates[fi][t] = instance
                .arcs
                .iter()
                .filter(|a| &a.from == fca)
                .map(|a| {
                    let tt = (t + a.travel_time).min(t_len - 1);
                    (0..instance.num_scenarios()).map(|q| instance.capacity(&a.to, tt, q)).max().unwrap_or(0)
                })
                .sum();
        }
    }
    plan
}

/// Phase one builds a rate plan per seed heuristic; phase two refines each
/// by pattern search over the chosen FCAs in the active periods. The time
/// budget is shared, each remaining seed getting an equal part of what is
/// left.
pub fn two_phase_optimize(
    instance: &Instance,
    seeds: &[SeedHeuristic],
    config: &OptimizeConfig,
) -> Result<OptimizeReport, SboError> {
    if seeds.is_empty() {
        return Err(SboError::NoSeeds);
    }
    let started = Instant::now();
    let subset = match &config.subset {
        Some(s) => s.clone(),
        None => most_congested(instance, 2)?,
    };
    let periods = 0..instance.horizon.active_periods;
    let bounds = rate_bounds(instance, &subset, periods.clone());

    let mut phase_one = Vec::with_capacity(seeds.len());
    for seed in seeds {
        let rates = seed.run(instance)?;
        let cost = rate_cost(&rates, instance);
        phase_one.push((seed.to_string(), rates, cost));
    }

    let mut reports = Vec::with_capacity(seeds.len());
    for (k, (name, rates, cost)) in phase_one.into_iter().enumerate() {
        let left = config.time_budget.saturating_sub(started.elapsed());
        let share = left / (seeds.len() - k) as u32;
        let search = SearchConfig {
            bounds: bounds.clone(),
            initial_step: config.initial_step,
            max_evaluations: config.max_evaluations,
            time_budget: share,
            ..SearchConfig::new(subset.clone(), periods.clone())
        };
        let t0 = Instant::now();
        let r = pattern_search(&rates, |p| rate_cost(p, instance), &search);
        // The search's first evaluation is the seed itself.
        let (refined, refined_cost) = if r.cost <= cost { (r.best, r.cost) } else { (rates.clone(), cost) };
        reports.push(SeedReport {
            seed: name,
            seed_rates: rates,
            seed_cost: cost,
            refined,
            refined_cost,
            evaluations: r.evaluations,
            seconds: t0.elapsed().as_secs_f64(),
            exhausted: r.exhausted,
            trace: r.trace,
        });
    }
    let best_seed = reports
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.refined_cost.total_cmp(&b.1.refined_cost).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("non-empty");
    Ok(OptimizeReport {
        subset,
        best: reports[best_seed].refined.clone(),
        best_cost: reports[best_seed].refined_cost,
        best_seed,
        seeds: reports,
    })
}
