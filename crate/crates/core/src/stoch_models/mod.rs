//! Stochastic rate-planning programs built from an [`Instance`], and the
//! extraction of FCA rate plans and per-scenario costs from their solutions.
//!
//! Four model families are provided: the aggregate FCA-PCA model with
//! pre-computed split ratios ([`build_esom`]), its semi-dynamic variant
//! with stage-wise recourse ([`build_semidynamic_esom`]), and two
//! path-commodity integer programs ([`build_two_stage_pca`],
//! [`build_semidynamic_pca`]).

mod cost;
mod esom;
mod pca;

pub use cost::{read_cost_csv, write_cost_csv, CostBreakdown, CostCsvError, CostRow};
pub use esom::{build_esom, build_semidynamic_esom};
pub use pca::{build_semidynamic_pca, build_two_stage_pca, build_two_stage_pca_with, min_backlog_share, PcaOptions};
pub(crate) use pca::{add_recourse, Inflow, RecoursePath};

use crate::lp_solver::{solve_lp, solve_mip, MathModel, MathSolution, SolveStatus, SolverError, VarId};
use crate::network::{Instance, NetworkError};
use crate::rates::RatePlan;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StochError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("model is {0}")]
    NotOptimal(SolveStatus),
    #[error("corrupt solution: `{name}` = {value}")]
    CorruptSolution { name: String, value: f64 },
    #[error("solution has {got} values for a model with {expected} variables")]
    SolutionShape { got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Esom,
    SemiDynamicEsom,
    TwoStagePca,
    SemiDynamicPca,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] =
        [ModelKind::Esom, ModelKind::SemiDynamicEsom, ModelKind::TwoStagePca, ModelKind::SemiDynamicPca];

    pub fn is_integer(self) -> bool {
        matches!(self, ModelKind::TwoStagePca | ModelKind::SemiDynamicPca)
    }

    /// Long name used in cost tables.
    pub fn title(self) -> &'static str {
        match self {
            ModelKind::Esom => "ESOM",
            ModelKind::SemiDynamicEsom => "Semi-Dynamic ESOM",
            ModelKind::TwoStagePca => "Two-Stage PCA",
            ModelKind::SemiDynamicPca => "Semi-Dynamic PCA",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Esom => "esom",
            ModelKind::SemiDynamicEsom => "sd-esom",
            ModelKind::TwoStagePca => "pca2",
            ModelKind::SemiDynamicPca => "sd-pca",
        })
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| format!("unknown model `{s}` (expected esom, sd-esom, pca2 or sd-pca)"))
    }
}

/// Per-path crossings and holds, `[scenario][path][node][period]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFlows<T> {
    pub paths: Vec<usize>,
    pub nodes: Vec<Vec<String>>,
    pub crossings: Vec<Vec<Vec<Vec<T>>>>,
    pub holds: Vec<Vec<Vec<Vec<T>>>>,
    /// Flights scheduled onto each path over the horizon.
    pub scheduled: Vec<f64>,
}

impl PathFlows<f64> {
    /// Capacity, terminal-hold and per-path conservation checks; returns
    /// one message per violation.
    pub fn check(&self, instance: &Instance, conserve: bool) -> Vec<String> {
        const TOL: f64 = 1e-6;
        let mut out = Vec::new();
        let t_len = instance.num_periods();
        for (q, per_path) in self.crossings.iter().enumerate() {
            let mut load: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            for (pi, nodes) in self.nodes.iter().enumerate() {
                for (ni, node) in nodes.iter().enumerate() {
                    let row = load.entry(node.as_str()).or_insert_with(|| vec![0.0; t_len]);
                    for (t, x) in per_path[pi][ni].iter().enumerate() {
                        row[t] += x;
                    }
                    let last_hold = self.holds[q][pi][ni].last().copied().unwrap_or(0.0);
                    if last_hold.abs() > TOL {
                        out.push(format!("scenario {q} path {} node {node}: {last_hold} still held at the end", self.paths[pi]));
                    }
                }
                if conserve {
                    let landed: f64 = per_path[pi].last().map_or(0.0, |r| r.iter().sum());
                    if (landed - self.scheduled[pi]).abs() > TOL {
                        out.push(format!(
                            "scenario {q} path {}: {landed} crossed the last node, {} scheduled",
                            self.paths[pi], self.scheduled[pi]
                        ));
                    }
                }
            }
            for (node, row) in load {
                for (t, &x) in row.iter().enumerate() {
                    let cap = instance.capacity(node, t, q) as f64;
                    if x > cap + TOL {
                        out.push(format!("scenario {q} {node} period {t}: {x} crossings exceed capacity {cap}"));
                    }
                }
            }
        }
        out
    }
}

impl PathFlows<VarId> {
    fn values(&self, sol: &MathSolution) -> PathFlows<f64> {
        let map = |v: &Vec<Vec<Vec<Vec<VarId>>>>| {
            v.iter()
                .map(|a| a.iter().map(|b| b.iter().map(|c| c.iter().map(|&x| sol.value(x)).collect()).collect()).collect())
                .collect()
        };
        PathFlows {
            paths: self.paths.clone(),
            nodes: self.nodes.clone(),
            crossings: map(&self.crossings),
            holds: map(&self.holds),
            scheduled: self.scheduled.clone(),
        }
    }
}

/// A built model together with the variable layout needed to read rates and
/// costs back out of a solution.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub kind: ModelKind,
    pub model: MathModel,
    pub(crate) fcas: Vec<String>,
    /// `[plan][fca][t]`: variables summing to the FCA rate. One plan for
    /// static models, one per scenario for semi-dynamic ones.
    pub(crate) rate_terms: Vec<Vec<Vec<Vec<VarId>>>>,
    /// Ground-delay periods: `(scenario or all, var, weight)`.
    pub(crate) ground: Vec<(Option<usize>, VarId, f64)>,
    /// Air-holding periods: `(scenario, var)`.
    pub(crate) air: Vec<(usize, VarId)>,
    /// Per PCA, `[scenario][t]` variables summing to its crossings.
    pub(crate) pca_crossings: BTreeMap<String, Vec<Vec<Vec<VarId>>>>,
    pub(crate) path_flows: Option<PathFlows<VarId>>,
}

impl BuiltModel {
    /// Solves with the LP or MIP solver as the model family requires.
    pub fn solve(&self) -> Result<MathSolution, SolverError> {
        if self.kind.is_integer() {
            solve_mip(&self.model)
        } else {
            solve_lp(&self.model)
        }
    }

    pub fn fcas(&self) -> &[String] {
        &self.fcas
    }

    /// Crossings per PCA, `[scenario][t]`.
    pub fn pca_crossings(&self, sol: &MathSolution) -> BTreeMap<String, Vec<Vec<f64>>> {
        self.pca_crossings
            .iter()
            .map(|(k, v)| (k.clone(), v.iter().map(|per_q| per_q.iter().map(|vs| sum(sol, vs)).collect()).collect()))
            .collect()
    }

    /// Path-level flows; `None` for the aggregate models.
    pub fn path_flows(&self, sol: &MathSolution) -> Option<PathFlows<f64>> {
        self.path_flows.as_ref().map(|f| f.values(sol))
    }
}

fn sum(sol: &MathSolution, vars: &[VarId]) -> f64 {
    vars.iter().map(|&v| sol.value(v)).sum()
}

fn check_solution(sol: &MathSolution, built: &BuiltModel) -> Result<(), StochError> {
    if sol.status != SolveStatus::Optimal {
        return Err(StochError::NotOptimal(sol.status));
    }
    if sol.values.len() != built.model.num_vars() {
        return Err(StochError::SolutionShape { got: sol.values.len(), expected: built.model.num_vars() });
    }
    for (v, &x) in built.model.variables.iter().zip(&sol.values) {
        if !x.is_finite() || x < -1e-7 {
            return Err(StochError::CorruptSolution { name: v.name.clone(), value: x });
        }
    }
    Ok(())
}

/// Round half up, tolerant of values a hair below the midpoint.
pub fn round_rate(x: f64) -> u32 {
    (x + 0.5 + 1e-9).floor().max(0.0) as u32
}

/// FCA rate plans: one for static models, one per scenario (in tree order)
/// for semi-dynamic models. Fractional rates are rounded half up; a
/// path-based model's FCA rate sums its paths' first-PCA rates shifted
/// back by the FCA-to-PCA travel time.
pub fn extract_fca_rates(sol: &MathSolution, built: &BuiltModel) -> Result<Vec<RatePlan>, StochError> {
    check_solution(sol, built)?;
    Ok(built
        .rate_terms
        .iter()
        .map(|plan| RatePlan {
            resources: built.fcas.clone(),
            rates: plan.iter().map(|row| row.iter().map(|vs| round_rate(sum(sol, vs))).collect()).collect(),
        })
        .collect())
}

/// Ground and air holding per scenario, priced with the instance's cost
/// weights and scenario probabilities.
pub fn per_scenario_costs(sol: &MathSolution, built: &BuiltModel, instance: &Instance) -> CostBreakdown {
    let q_len = instance.num_scenarios();
    let mut ground = vec![0.0; q_len];
    let mut air = vec![0.0; q_len];
    if sol.is_optimal() {
        for &(q, v, w) in &built.ground {
            let x = w * sol.value(v);
            match q {
                Some(q) => ground[q] += x,
                None => ground.iter_mut().for_each(|g| *g += x),
            }
        }
        for &(q, v) in &built.air {
            air[q] += sol.value(v);
        }
    }
    CostBreakdown::new(
        instance.scenario_tree.scenarios.iter().map(|s| s.name.clone()).collect(),
        instance.scenario_tree.probabilities(),
        ground,
        air,
        instance.costs,
    )
}
