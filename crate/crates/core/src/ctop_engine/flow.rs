use super::allocate::{AllocationResult, Inclusion};
use super::EngineError;
use crate::lp_solver::{solve_mip, MathModel, SolveStatus};
use crate::network::{Instance, NetworkError};
use crate::stoch_models::{add_recourse, Inflow, PathFlows, RecoursePath};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSimResult {
    /// Arrivals at each path's first PCA after allocation, `[path][t]`,
    /// aligned with the instance's path list.
    pub scheduled: Vec<Vec<f64>>,
    pub flows: PathFlows<f64>,
    /// Air-holding periods per scenario.
    pub holds: Vec<f64>,
    /// `c_a` times the probability-weighted holding.
    pub expected_air_cost: f64,
}

/// First-PCA arrivals of every non-exempt flight: included flights on their
/// chosen option shifted by their ground delay, excluded flights on their
/// first option as filed.
pub fn scheduled_path_demand(allocation: &AllocationResult, instance: &Instance) -> Result<Vec<Vec<f64>>, EngineError> {
    let t_len = instance.num_periods();
    let paths = RecoursePath::all(instance)?;
    let mut out = vec![vec![0.0; t_len]; paths.len()];
    let flights: BTreeMap<&str, _> = instance.flights.iter().map(|f| (f.id.as_str(), f)).collect();
    for a in &allocation.assignments {
        if a.inclusion == Inclusion::Exempt {
            continue;
        }
        let f = flights.get(a.flight.as_str()).ok_or_else(|| EngineError::UnknownFlight(a.flight.clone()))?;
        let o = &f.tos[a.option];
        let pi = instance.path_index(o.path).ok_or(NetworkError::UnknownPath(o.path))?;
        let entry = o.entry().ok_or_else(|| NetworkError::NoOptions { flight: f.id.clone() })?;
        let period = instance.horizon.period_of(entry.time + a.ground_delay_s) + paths[pi].entry_lag as i64;
        if period < 0 || period >= t_len as i64 {
            return Err(NetworkError::OutsideHorizon {
                flight: f.id.clone(),
                resource: paths[pi].nodes[0].clone(),
                period,
                horizon: t_len,
            }
            .into());
        }
        out[pi][period as usize] += 1.0;
    }
    Ok(out)
}

/// Queues scheduled path arrivals through the PCAs under every capacity
/// scenario, holding airborne flights as little as possible.
pub fn simulate_path_demand(instance: &Instance, scheduled: Vec<Vec<f64>>) -> Result<FlowSimResult, EngineError> {
    let mut paths = RecoursePath::all(instance)?;
    for (p, s) in paths.iter_mut().zip(&scheduled) {
        p.bound = s.iter().sum();
    }
    let inflow: Vec<Vec<Inflow>> = scheduled.iter().map(|row| row.iter().map(|&x| Inflow::Const(x)).collect()).collect();
    let tree = &instance.scenario_tree;
    let mut crossings = Vec::with_capacity(tree.len());
    let mut hold_values = Vec::with_capacity(tree.len());
    let mut holds = Vec::with_capacity(tree.len());
    for q in 0..tree.len() {
        let mut m = MathModel::new(format!("flow-sim-{}", tree.scenarios[q].name));
        let rec = add_recourse(&mut m, instance, &paths, q, &inflow, 1.0);
        let sol = solve_mip(&m)?;
        if sol.status != SolveStatus::Optimal {
            return Err(EngineError::FlowInfeasible { scenario: tree.scenarios[q].name.clone() });
        }
        let val = |v: &Vec<Vec<Vec<_>>>| -> Vec<Vec<Vec<f64>>> {
            v.iter().map(|p| p.iter().map(|n| n.iter().map(|&x| sol.value(x)).collect()).collect()).collect()
        };
        crossings.push(val(&rec.l));
        hold_values.push(val(&rec.a));
        holds.push(sol.objective);
    }
    let expected_air_cost =
        instance.costs.air * tree.probabilities().iter().zip(&holds).map(|(p, h)| p * h).sum::<f64>();
    let flows = PathFlows {
        paths: paths.iter().map(|p| p.id).collect(),
        nodes: paths.iter().map(|p| p.nodes.clone()).collect(),
        crossings,
        holds: hold_values,
        scheduled: paths.iter().map(|p| p.bound).collect(),
    };
    Ok(FlowSimResult { scheduled, flows, holds, expected_air_cost })
}

pub fn flow_simulate(allocation: &AllocationResult, instance: &Instance) -> Result<FlowSimResult, EngineError> {
    simulate_path_demand(instance, scheduled_path_demand(allocation, instance)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Scenario, ScenarioTree, Stage};
    use crate::test_util::single_lane;

    #[test]
    fn three_arrivals_capacity_two_hold_one() {
        let inst = single_lane(&[], 2, 4);
        let r = simulate_path_demand(&inst, vec![vec![0.0, 3.0, 0.0, 0.0]]).unwrap();
        assert_eq!(r.holds, vec![1.0]);
        assert_eq!(r.expected_air_cost, 2.0);
        assert!(r.flows.check(&inst, true).is_empty());
    }

    #[test]
    fn light_demand_never_holds() {
        let inst = single_lane(&[], 5, 4);
        let r = simulate_path_demand(&inst, vec![vec![1.0, 2.0, 5.0, 0.0]]).unwrap();
        assert_eq!(r.expected_air_cost, 0.0);
    }

    #[test]
    fn expected_cost_weights_scenarios() {
        let mut inst = single_lane(&[], 3, 4);
        inst.scenario_tree = ScenarioTree {
            scenarios: vec![
                Scenario { name: "Lo".into(), probability: 0.5 },
                Scenario { name: "Hi".into(), probability: 0.5 },
            ],
            stages: vec![Stage { start: 0, groups: vec![vec![0, 1]] }],
        };
        let table = inst.capacities.by_resource.get_mut("K").unwrap();
        for (t, row) in table.iter_mut().enumerate() {
            *row = vec![if t == 1 { 1 } else { 3 }, 3];
        }
        let r = simulate_path_demand(&inst, vec![vec![0.0, 3.0, 0.0, 0.0]]).unwrap();
        assert_eq!(r.holds, vec![2.0, 0.0]);
        assert_eq!(r.expected_air_cost, 2.0);
    }

    #[test]
    fn too_little_padding_is_infeasible() {
        let inst = single_lane(&[], 1, 2);
        let err = simulate_path_demand(&inst, vec![vec![0.0, 3.0]]).unwrap_err();
        assert!(matches!(err, EngineError::FlowInfeasible { .. }));
    }
}
