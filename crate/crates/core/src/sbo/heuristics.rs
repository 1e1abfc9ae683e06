use super::SboError;
use crate::ctop_engine::{allocate_tos, create_slots, evaluate_rates, EngineError, Inclusion, Program};
use crate::network::{derive_demand, DemandMatrix, Instance};
use crate::rates::RatePlan;
use crate::stoch_models::{
    build_two_stage_pca_with, extract_fca_rates, min_backlog_share, round_rate, PcaOptions,
};
use std::fmt;
use std::str::FromStr;

pub const DEFAULT_SATURATION_LEVEL: u32 = 999;
/// Saturating demand is scaled to this multiple of the real total.
const SCALE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpolationMode {
    /// Probability-weighted capacity, rounded half up.
    Weighted,
    /// Lower median across scenarios.
    Median,
}

impl fmt::Display for InterpolationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InterpolationMode::Weighted => "weighted",
            InterpolationMode::Median => "median",
        })
    }
}

impl FromStr for InterpolationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "weighted" => Ok(InterpolationMode::Weighted),
            "median" => Ok(InterpolationMode::Median),
            _ => Err(format!("unknown interpolation mode `{s}` (expected weighted or median)")),
        }
    }
}

/// Splits `n` across `weights` proportionally; leftover units go to the
/// largest fractional parts, earlier entries first on ties.
pub(crate) fn largest_remainder(n: u32, weights: &[f64]) -> Vec<u32> {
    let total: f64 = weights.iter().sum();
    if weights.is_empty() {
        return Vec::new();
    }
    let shares: Vec<f64> = if total > 0.0 {
        weights.iter().map(|w| n as f64 * w / total).collect()
    } else {
        vec![n as f64 / weights.len() as f64; weights.len()]
    };
    let mut out: Vec<u32> = shares.iter().map(|s| s.floor() as u32).collect();
    let mut left = n - out.iter().sum::<u32>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (shares[b] - shares[b].floor()).total_cmp(&(shares[a] - shares[a].floor())).then(a.cmp(&b)));
    for i in order.into_iter().cycle() {
        if left == 0 {
            break;
        }
        out[i] += 1;
        left -= 1;
    }
    out
}

/// Per-FCA demand cells split onto the FCA's paths in proportion to
/// `path_weight` (indexed like `instance.paths`).
fn split_to_paths(instance: &Instance, by_fca: &[(String, Vec<u32>)], path_weight: &[f64]) -> DemandMatrix {
    let mut d = DemandMatrix::zeros(instance);
    for (fca, row) in by_fca {
        let members: Vec<usize> =
            instance.paths.iter().enumerate().filter(|(_, p)| &p.entry_fca == fca).map(|(i, _)| i).collect();
        let weights: Vec<f64> = members.iter().map(|&i| path_weight[i]).collect();
        let fi = d.fca_index(fca).expect("fca from instance");
        for (t, &n) in row.iter().enumerate() {
            d.by_fca[fi][t] = n;
            for (&pi, share) in members.iter().zip(largest_remainder(n, &weights)) {
                let di = d.paths.iter().position(|&id| id == instance.paths[pi].id).expect("path from instance");
                d.by_path[di][t] = share;
            }
        }
    }
    d
}

/// Scheduled flights per path over the horizon, from the real demand.
fn path_weights(instance: &Instance, demand: &DemandMatrix) -> Vec<f64> {
    instance.paths.iter().map(|p| demand.path(p.id).map_or(0.0, |r| r.iter().sum::<u32>() as f64)).collect()
}

fn solve_saturated(instance: &Instance, demand: &DemandMatrix, balanced: bool) -> Result<RatePlan, SboError> {
    let backlog_share = if balanced { Some(min_backlog_share(instance, demand)?) } else { None };
    let built = build_two_stage_pca_with(instance, demand, PcaOptions { saturated: true, backlog_share })?;
    let sol = built.solve()?;
    Ok(extract_fca_rates(&sol, &built)?.swap_remove(0))
}

/// Floods every FCA with `level` flights in each active period and reads
/// the rates the two-stage path model can sustain. No slot allocation is
/// involved.
pub fn saturate_uniform(instance: &Instance, level: u32) -> Result<RatePlan, SboError> {
    let real = derive_demand(&instance.flights, instance)?;
    let weights = path_weights(instance, &real);
    let active = instance.horizon.active_periods;
    let rows: Vec<(String, Vec<u32>)> = instance
        .fcas()
        .into_iter()
        .map(|f| (f.to_string(), (0..instance.num_periods()).map(|t| if t < active { level } else { 0 }).collect()))
        .collect();
    solve_saturated(instance, &split_to_paths(instance, &rows, &weights), false)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaturationStep {
    pub rates: RatePlan,
    /// Cost of `rates` under the full pipeline; infinite on overflow.
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterativeSaturation {
    pub rates: RatePlan,
    pub history: Vec<SaturationStep>,
    /// Whether the loop stopped on a fixpoint rather than the limit.
    pub converged: bool,
}

/// Scales FCA demand so it totals ten times the real demand, rounds, and
/// raises empty active cells to 1.
fn saturating_rows(instance: &Instance, by_fca: &[(String, Vec<f64>)], real_total: f64) -> Vec<(String, Vec<u32>)> {
    let total: f64 = by_fca.iter().flat_map(|(_, r)| r).sum();
    let factor = if total > 0.0 { SCALE_FACTOR * real_total.max(1.0) / total } else { 0.0 };
    let active = instance.horizon.active_periods;
    by_fca
        .iter()
        .map(|(f, row)| {
            let scaled = row
                .iter()
                .enumerate()
                .map(|(t, &x)| {
                    let n = round_rate(x * factor);
                    if n == 0 && t < active {
                        1
                    } else {
                        n
                    }
                })
                .collect();
            (f.clone(), scaled)
        })
        .collect()
}

/// Demand after allocating under `rates`: each non-exempt flight on the
/// option it was given, at that option's unimpeded entry period. Only the
/// route choice feeds back, not the delay, so the estimate tracks demand
/// moving between FCAs.
fn allocated_demand(instance: &Instance, rates: &RatePlan) -> Result<(Vec<(String, Vec<f64>)>, Vec<f64>), SboError> {
    let program = Program::for_instance(instance);
    let allocation = allocate_tos(&program, &instance.flights, create_slots(rates, &instance.horizon))?;
    let t_len = instance.num_periods();
    let mut rows: Vec<(String, Vec<f64>)> =
        instance.fcas().into_iter().map(|f| (f.to_string(), vec![0.0; t_len])).collect();
    let mut weights = vec![0.0; instance.paths.len()];
    for a in allocation.assignments.iter().filter(|a| a.inclusion != Inclusion::Exempt) {
        let f = instance.flights.iter().find(|f| f.id == a.flight).expect("allocated flight");
        let o = &f.tos[a.option];
        let Some(entry) = o.entry() else { continue };
        let period = instance.horizon.period_of(entry.time);
        let (Some(fi), Some(pi)) = (rows.iter().position(|(r, _)| *r == entry.fca), instance.path_index(o.path)) else {
            continue;
        };
        if (0..t_len as i64).contains(&period) {
            rows[fi].1[period as usize] += 1.0;
            weights[pi] += 1.0;
        }
    }
    Ok((rows, weights))
}

/// Repeats: scale the demand estimate up, solve the saturated path model,
/// allocate under the resulting rates to obtain a new estimate. Stops when
/// the rates or the scaled demand repeat, or after `max_iter` solves.
pub fn saturate_iterative(instance: &Instance, max_iter: usize) -> Result<IterativeSaturation, SboError> {
    let real = derive_demand(&instance.flights, instance)?;
    let real_total = real.total() as f64;
    let mut weights = path_weights(instance, &real);
    let mut estimate: Vec<(String, Vec<f64>)> = real
        .fcas
        .iter()
        .zip(&real.by_fca)
        .map(|(f, r)| (f.clone(), r.iter().map(|&x| x as f64).collect()))
        .collect();
    let mut history: Vec<SaturationStep> = Vec::new();
    for _ in 0..max_iter.max(1) {
        let rows = saturating_rows(instance, &estimate, real_total);
        let rates = solve_saturated(instance, &split_to_paths(instance, &rows, &weights), true)?;
        let cost = evaluate_rates(&rates, instance).map_or(f64::INFINITY, |e| e.cost.total);
        let repeated = history.last().is_some_and(|s| s.rates == rates);
        history.push(SaturationStep { rates: rates.clone(), cost });
        if repeated {
            return Ok(IterativeSaturation { rates, history, converged: true });
        }
        let (next, next_weights) = match allocated_demand(instance, &rates) {
            Ok(x) => x,
            // The rates cannot place every flight, so there is no new
            // estimate to iterate on.
            Err(SboError::Engine(EngineError::Overflow { .. })) => {
                return Ok(IterativeSaturation { rates, history, converged: false })
            }
            Err(e) => return Err(e),
        };
        let next_rows = saturating_rows(instance, &next, real_total);
        if next_rows == rows {
            return Ok(IterativeSaturation { rates, history, converged: true });
        }
        estimate = next;
        weights = next_weights;
    }
    let rates = history.last().expect("at least one iteration").rates.clone();
    Ok(IterativeSaturation { rates, history, converged: false })
}

/// PCAs fed directly by `fca`, with travel times.
fn successors<'a>(instance: &'a Instance, fca: &str) -> impl Iterator<Item = (&'a str, usize)> {
    let fca = fca.to_string();
    instance.arcs.iter().filter(move |a| a.from == fca).map(|a| (a.to.as_str(), a.travel_time))
}

/// Rates from scenario capacities: each FCA gets the interpolated capacity
/// of the PCAs it feeds, taken at the period its flights reach them.
pub fn interpolate_capacity(instance: &Instance, mode: InterpolationMode) -> RatePlan {
    let t_len = instance.num_periods();
    let probs = instance.scenario_tree.probabilities();
    let fcas: Vec<String> = instance.fcas().into_iter().map(String::from).collect();
    let mut plan = RatePlan::zeros(fcas.clone(), t_len);
    for (fi, fca) in fcas.iter().enumerate() {
        for t in 0..t_len {
            plan.rates[fi][t] = successors(instance, fca)
                .map(|(pca, lag)| {
                    let tt = (t + lag).min(t_len - 1);
                    let caps: Vec<u32> = (0..probs.len()).map(|q| instance.capacity(pca, tt, q)).collect();
                    match mode {
                        InterpolationMode::Weighted => {
                            round_rate(caps.iter().zip(&probs).map(|(&c, p)| c as f64 * p).sum())
                        }
                        InterpolationMode::Median => {
                            let mut s = caps;
                            s.sort_unstable();
                            s.get((s.len().max(1) - 1) / 2).copied().unwrap_or(0)
                        }
                    }
                })
                .sum();
        }
    }
    plan
}

/// FCAs ranked by how overloaded the PCAs they feed are: scheduled flights
/// through the PCA (from every path) over its expected capacity in the
/// active periods. The first `k` are returned.
pub fn most_congested(instance: &Instance, k: usize) -> Result<Vec<String>, SboError> {
    let demand = derive_demand(&instance.flights, instance)?;
    let probs = instance.scenario_tree.probabilities();
    let active = instance.horizon.active_periods;
    let load_ratio = |pca: &str| {
        let load: f64 = instance
            .paths
            .iter()
            .filter(|p| p.node_sequence.iter().any(|n| n == pca))
            .map(|p| demand.path(p.id).map_or(0, |r| r.iter().map(|&x| x as u64).sum::<u64>()) as f64)
            .sum();
        let cap: f64 = (0..active)
            .map(|t| probs.iter().enumerate().map(|(q, p)| p * instance.capacity(pca, t, q) as f64).sum::<f64>())
            .sum();
        if cap > 0.0 {
            load / cap
        } else if load > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    };
    let mut ranked: Vec<(f64, String)> = instance
        .fcas()
        .into_iter()
        .map(|fca| (successors(instance, fca).map(|(pca, _)| load_ratio(pca)).fold(0.0, f64::max), fca.to_string()))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    Ok(ranked.into_iter().take(k).map(|(_, f)| f).collect())
}
