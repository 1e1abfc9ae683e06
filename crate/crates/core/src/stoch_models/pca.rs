//! Path-commodity integer programs. Each path keeps its own flow, so flights
//! follow their scheduled route and every flight lands within the horizon.

use super::{BuiltModel, ModelKind, PathFlows, StochError};
use crate::lp_solver::{solve_lp, MathModel, Relation, VarId};
use crate::network::{DemandMatrix, Instance};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PcaOptions {
    /// Leave ground holding at the end of the horizon free, so demand that
    /// cannot be served simply stays on the ground. Used with artificial
    /// saturating demand.
    pub saturated: bool,
    /// With `saturated`, cap every path's unserved demand at this fraction
    /// of its total (rounded up to whole flights). See
    /// [`min_backlog_share`].
    pub backlog_share: Option<f64>,
}

/// What enters a path's first PCA in a period.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Inflow {
    Var(VarId),
    Const(f64),
}

#[derive(Debug, Clone)]
pub(crate) struct RecoursePath {
    pub id: usize,
    pub entry_fca: String,
    /// Periods from the entry FCA to the first PCA.
    pub entry_lag: usize,
    pub nodes: Vec<String>,
    /// `gaps[i]`: travel time from node `i - 1` to node `i` (`gaps[0] = 0`).
    pub gaps: Vec<usize>,
    /// Upper bound on flow through the path.
    pub bound: f64,
}

impl RecoursePath {
    pub fn all(instance: &Instance) -> Result<Vec<RecoursePath>, StochError> {
        instance
            .paths
            .iter()
            .map(|p| {
                let offsets = instance.path_offsets(p)?;
                let gaps = (0..offsets.len()).map(|i| if i == 0 { 0 } else { offsets[i] - offsets[i - 1] }).collect();
                Ok(RecoursePath {
                    id: p.id,
                    entry_fca: p.entry_fca.clone(),
                    entry_lag: offsets[0],
                    nodes: p.node_sequence.clone(),
                    gaps,
                    bound: 0.0,
                })
            })
            .collect()
    }
}

/// Crossing (`L`) and hold (`A`) variables of one scenario, `[path][node][t]`.
pub(crate) struct Recourse {
    pub l: Vec<Vec<Vec<VarId>>>,
    pub a: Vec<Vec<Vec<VarId>>>,
}

/// Adds the per-path queueing recourse for scenario `q`:
/// `L = inflow - (A_t - A_{t-1})` at the first node, the upstream node's
/// crossings shifted by the travel time at later nodes, shared PCA capacity
/// across paths, no hold left at the final period, and no crossing so late
/// that the next node falls outside the horizon. Holds are priced at
/// `air_weight` in the objective.
pub(crate) fn add_recourse(
    m: &mut MathModel,
    instance: &Instance,
    paths: &[RecoursePath],
    q: usize,
    inflow: &[Vec<Inflow>],
    air_weight: f64,
) -> Recourse {
    let t_len = instance.num_periods();
    let mut l = Vec::with_capacity(paths.len());
    let mut a = Vec::with_capacity(paths.len());
    for p in paths {
        let mut lp = Vec::with_capacity(p.nodes.len());
        let mut ap = Vec::with_capacity(p.nodes.len());
        for (i, node) in p.nodes.iter().enumerate() {
            let next_gap = p.gaps.get(i + 1).copied();
            let lv: Vec<VarId> = (0..t_len)
                .map(|t| {
                    let reachable = next_gap.is_none_or(|g| t + g < t_len);
                    let ub = if reachable { p.bound } else { 0.0 };
                    m.add_integer(format!("L_q{q}_p{}_{node}_t{t}", p.id), 0.0, ub)
                })
                .collect();
            let av: Vec<VarId> = (0..t_len)
                .map(|t| {
                    let ub = if t + 1 == t_len { 0.0 } else { p.bound };
                    let v = m.add_integer(format!("A_q{q}_p{}_{node}_t{t}", p.id), 0.0, ub);
                    m.add_objective_term(v, air_weight);
                    v
                })
                .collect();
            lp.push(lv);
            ap.push(av);
        }
        l.push(lp);
        a.push(ap);
    }

    for (pi, p) in paths.iter().enumerate() {
        for i in 0..p.nodes.len() {
            for t in 0..t_len {
                let mut terms = vec![(l[pi][i][t], 1.0), (a[pi][i][t], 1.0)];
                if t > 0 {
                    terms.push((a[pi][i][t - 1], -1.0));
                }
                let mut rhs = 0.0;
                if i == 0 {
                    match inflow[pi][t] {
                        Inflow::Var(v) => terms.push((v, -1.0)),
                        Inflow::Const(c) => rhs = c,
                    }
                } else if let Some(t0) = t.checked_sub(p.gaps[i]) {
                    terms.push((l[pi][i - 1][t0], -1.0));
                }
                m.add_constraint(format!("pass_q{q}_p{}_{}_t{t}", p.id, p.nodes[i]), terms, Relation::Eq, rhs);
            }
        }
    }

    // Shared capacity per PCA.
    let mut users: BTreeMap<&str, Vec<(usize, usize)>> = BTreeMap::new();
    for (pi, p) in paths.iter().enumerate() {
        for (i, node) in p.nodes.iter().enumerate() {
            users.entry(node.as_str()).or_default().push((pi, i));
        }
    }
    for (node, list) in users {
        let reach: f64 = list.iter().map(|&(pi, _)| paths[pi].bound).sum();
        for t in 0..t_len {
            let cap = instance.capacity(node, t, q) as f64;
            if cap >= reach {
                continue;
            }
            let terms = list.iter().map(|&(pi, i)| (l[pi][i][t], 1.0)).collect();
            m.add_constraint(format!("cap_q{q}_{node}_t{t}"), terms, Relation::Le, cap);
        }
    }
    Recourse { l, a }
}

fn path_demand(demand: &DemandMatrix, id: usize, t_len: usize) -> Vec<f64> {
    demand.path(id).map_or_else(|| vec![0.0; t_len], |row| row.iter().map(|&x| x as f64).collect())
}

/// Rate terms: an FCA's rate at `t` is the sum of its paths' first-PCA
/// rates at `t + lag`.
fn fca_rate_terms(instance: &Instance, paths: &[RecoursePath], p: &[Vec<VarId>]) -> Vec<Vec<Vec<VarId>>> {
    let t_len = instance.num_periods();
    instance
        .fcas()
        .into_iter()
        .map(|fca| {
            (0..t_len)
                .map(|t| {
                    paths
                        .iter()
                        .enumerate()
                        .filter(|(_, rp)| rp.entry_fca == fca && t + rp.entry_lag < t_len)
                        .map(|(pi, rp)| p[pi][t + rp.entry_lag])
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn crossings_by_pca(paths: &[RecoursePath], per_q: &[Recourse]) -> BTreeMap<String, Vec<Vec<Vec<VarId>>>> {
    let t_len = per_q.first().and_then(|r| r.l.first()).and_then(|n| n.first()).map_or(0, Vec::len);
    let mut out: BTreeMap<String, Vec<Vec<Vec<VarId>>>> = BTreeMap::new();
    for (q, rec) in per_q.iter().enumerate() {
        for (pi, p) in paths.iter().enumerate() {
            for (i, node) in p.nodes.iter().enumerate() {
                let entry = out.entry(node.clone()).or_insert_with(|| vec![vec![Vec::new(); t_len]; per_q.len()]);
                for t in 0..t_len {
                    entry[q][t].push(rec.l[pi][i][t]);
                }
            }
        }
    }
    out
}

fn flows(paths: &[RecoursePath], per_q: Vec<Recourse>, scheduled: Vec<f64>) -> PathFlows<VarId> {
    let (crossings, holds) = per_q.into_iter().map(|r| (r.l, r.a)).unzip();
    PathFlows {
        paths: paths.iter().map(|p| p.id).collect(),
        nodes: paths.iter().map(|p| p.nodes.clone()).collect(),
        crossings,
        holds,
        scheduled,
    }
}

pub fn build_two_stage_pca(instance: &Instance, demand: &DemandMatrix) -> Result<BuiltModel, StochError> {
    build_two_stage_pca_with(instance, demand, PcaOptions::default())
}

/// First stage: per-path ground holding `G` and first-PCA rates
/// `P = S - (G_t - G_{t-1})`, shared by all scenarios. Second stage: per
/// scenario queueing recourse along every path. Solve as a MIP.
pub fn build_two_stage_pca_with(
    instance: &Instance,
    demand: &DemandMatrix,
    opts: PcaOptions,
) -> Result<BuiltModel, StochError> {
    build_two_stage(instance, demand, opts, false)
}

/// Smallest fraction of demand that must be left unserved on some path when
/// every path is flooded with `demand` (LP relaxation). Without such a cap,
/// flights on longer paths can always leave earlier for the same landing
/// slot, and a saturated solve starves the shortest paths entirely.
pub fn min_backlog_share(instance: &Instance, demand: &DemandMatrix) -> Result<f64, StochError> {
    let opts = PcaOptions { saturated: true, backlog_share: None };
    let built = build_two_stage(instance, demand, opts, true)?;
    let sol = solve_lp(&built.model.relaxation())?;
    if !sol.is_optimal() {
        return Err(StochError::NotOptimal(sol.status));
    }
    let z = built.model.var_by_name(SHARE_VAR).expect("share variable");
    Ok(sol.value(z).clamp(0.0, 1.0))
}

const SHARE_VAR: &str = "max_backlog_share";

fn build_two_stage(
    instance: &Instance,
    demand: &DemandMatrix,
    opts: PcaOptions,
    share_objective: bool,
) -> Result<BuiltModel, StochError> {
    let t_len = instance.num_periods();
    let q_len = instance.num_scenarios();
    let probs = instance.scenario_tree.probabilities();
    let costs = instance.costs;
    let mut paths = RecoursePath::all(instance)?;
    let sched: Vec<Vec<f64>> = paths.iter().map(|p| path_demand(demand, p.id, t_len)).collect();
    for (p, s) in paths.iter_mut().zip(&sched) {
        p.bound = s.iter().sum();
    }
    let mut m = MathModel::new(if opts.saturated { "pca2-saturated" } else { "pca2" });

    let mut g = Vec::with_capacity(paths.len());
    let mut p = Vec::with_capacity(paths.len());
    let mut ground = Vec::new();
    for (pi, rp) in paths.iter().enumerate() {
        let mut gp = Vec::with_capacity(t_len);
        let mut pp = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let g_ub = match (t + 1 == t_len, opts.saturated, opts.backlog_share) {
                (false, _, _) => rp.bound,
                (true, false, _) => 0.0,
                (true, true, None) => rp.bound,
                (true, true, Some(share)) => (rp.bound * share - 1e-9).ceil().clamp(0.0, rp.bound),
            };
            let gv = m.add_integer(format!("G_p{}_t{t}", rp.id), 0.0, g_ub);
            m.add_objective_term(gv, costs.ground);
            ground.push((None, gv, 1.0));
            gp.push(gv);
            pp.push(m.add_integer(format!("P_p{}_t{t}", rp.id), 0.0, rp.bound));
        }
        for t in 0..t_len {
            let mut terms = vec![(pp[t], 1.0), (gp[t], 1.0)];
            if t > 0 {
                terms.push((gp[t - 1], -1.0));
            }
            m.add_constraint(format!("release_p{}_t{t}", rp.id), terms, Relation::Eq, sched[pi][t]);
        }
        g.push(gp);
        p.push(pp);
    }

    if share_objective {
        // Dominates any difference in delay cost.
        let weight = costs.ground.max(costs.air) * t_len as f64 * paths.iter().map(|p| p.bound).sum::<f64>().max(1.0);
        let z = m.add_continuous(SHARE_VAR, 0.0, 1.0);
        m.add_objective_term(z, weight);
        for (rp, gp) in paths.iter().zip(&g) {
            if rp.bound > 0.0 {
                m.add_constraint(
                    format!("backlog_p{}", rp.id),
                    vec![(gp[t_len - 1], 1.0), (z, -rp.bound)],
                    Relation::Le,
                    0.0,
                );
            }
        }
    }

    let inflow: Vec<Vec<Inflow>> = p.iter().map(|row| row.iter().map(|&v| Inflow::Var(v)).collect()).collect();
    let per_q: Vec<Recourse> =
        (0..q_len).map(|q| add_recourse(&mut m, instance, &paths, q, &inflow, costs.air * probs[q])).collect();
    let air = per_q
        .iter()
        .enumerate()
        .flat_map(|(q, r)| r.a.iter().flatten().flatten().map(move |&v| (q, v)))
        .collect();

    Ok(BuiltModel {
        kind: ModelKind::TwoStagePca,
        fcas: instance.fcas().into_iter().map(String::from).collect(),
        rate_terms: vec![fca_rate_terms(instance, &paths, &p)],
        ground,
        air,
        pca_crossings: crossings_by_pca(&paths, &per_q),
        path_flows: Some(flows(&paths, per_q, paths.iter().map(|p| p.bound).collect())),
        model: m,
    })
}

/// Multistage path model: ground holding of flights departing in stage `s`
/// may differ by scenario but is shared within each stage-`s` branch. Rates
/// become scenario dependent. Solve as a MIP.
pub fn build_semidynamic_pca(instance: &Instance, demand: &DemandMatrix) -> Result<BuiltModel, StochError> {
    let t_len = instance.num_periods();
    let q_len = instance.num_scenarios();
    let tree = &instance.scenario_tree;
    let probs = tree.probabilities();
    let costs = instance.costs;
    let mut paths = RecoursePath::all(instance)?;
    let n_stages = demand.by_stage_path.len();
    // by_stage[s][pi][t]
    let by_stage: Vec<Vec<Vec<f64>>> = (0..n_stages)
        .map(|s| {
            paths
                .iter()
                .map(|rp| {
                    demand.paths.iter().position(|&id| id == rp.id).map_or_else(
                        || vec![0.0; t_len],
                        |i| demand.by_stage_path[s][i].iter().map(|&x| x as f64).collect(),
                    )
                })
                .collect()
        })
        .collect();
    for (pi, rp) in paths.iter_mut().enumerate() {
        rp.bound = by_stage.iter().map(|st| st[pi].iter().sum::<f64>()).sum();
    }
    let mut m = MathModel::new("sd-pca");

    // g[q][s][pi][t]
    let mut g: Vec<Vec<Vec<Vec<Option<VarId>>>>> = vec![vec![vec![vec![None; t_len]; paths.len()]; n_stages]; q_len];
    let mut ground = Vec::new();
    for (q, gq) in g.iter_mut().enumerate() {
        for (s, gs) in gq.iter_mut().enumerate() {
            for (pi, rp) in paths.iter().enumerate() {
                let row = &by_stage[s][pi];
                let Some(first) = row.iter().position(|&x| x > 0.0) else { continue };
                let total: f64 = row.iter().sum();
                for t in first..t_len.saturating_sub(1) {
                    let v = m.add_integer(format!("G_q{q}_s{s}_p{}_t{t}", rp.id), 0.0, total);
                    m.add_objective_term(v, probs[q] * costs.ground);
                    ground.push((Some(q), v, 1.0));
                    gs[pi][t] = Some(v);
                }
            }
        }
    }

    let diff = |gs: &[Option<VarId>], t: usize| {
        let mut terms = Vec::new();
        if let Some(v) = gs[t] {
            terms.push((v, 1.0));
        }
        if t > 0 {
            if let Some(v) = gs[t - 1] {
                terms.push((v, -1.0));
            }
        }
        terms
    };

    let mut p = vec![Vec::with_capacity(paths.len()); q_len];
    for q in 0..q_len {
        for (pi, rp) in paths.iter().enumerate() {
            let mut pp = Vec::with_capacity(t_len);
            for t in 0..t_len {
                let pv = m.add_integer(format!("P_q{q}_p{}_t{t}", rp.id), 0.0, rp.bound);
                let mut terms = vec![(pv, 1.0)];
                let mut rhs = 0.0;
                for s in 0..n_stages {
                    let d = diff(&g[q][s][pi], t);
                    // Stage-s releases cannot run ahead of stage-s schedule.
                    if g[q][s][pi][t].is_some() {
                        m.add_constraint(
                            format!("ahead_q{q}_s{s}_p{}_t{t}", rp.id),
                            d.clone(),
                            Relation::Le,
                            by_stage[s][pi][t],
                        );
                    }
                    terms.extend(d);
                    rhs += by_stage[s][pi][t];
                }
                m.add_constraint(format!("release_q{q}_p{}_t{t}", rp.id), terms, Relation::Eq, rhs);
                pp.push(pv);
            }
            p[q].push(pp);
        }
    }

    for (s, stage) in tree.stages.iter().enumerate().take(n_stages) {
        for group in &stage.groups {
            let Some((&lead, rest)) = group.split_first() else { continue };
            for &q in rest {
                for (pi, rp) in paths.iter().enumerate() {
                    for t in 0..t_len {
                        if let (Some(a), Some(b)) = (g[q][s][pi][t], g[lead][s][pi][t]) {
                            m.add_constraint(
                                format!("nonant_q{q}_s{s}_p{}_t{t}", rp.id),
                                vec![(a, 1.0), (b, -1.0)],
                                Relation::Eq,
                                0.0,
                            );
                        }
                    }
                }
            }
        }
    }

    let per_q: Vec<Recourse> = (0..q_len)
        .map(|q| {
            let inflow: Vec<Vec<Inflow>> =
                p[q].iter().map(|row| row.iter().map(|&v| Inflow::Var(v)).collect()).collect();
            add_recourse(&mut m, instance, &paths, q, &inflow, costs.air * probs[q])
        })
        .collect();
    let air = per_q
        .iter()
        .enumerate()
        .flat_map(|(q, r)| r.a.iter().flatten().flatten().map(move |&v| (q, v)))
        .collect();

    Ok(BuiltModel {
        kind: ModelKind::SemiDynamicPca,
        fcas: instance.fcas().into_iter().map(String::from).collect(),
        rate_terms: p.iter().map(|pq| fca_rate_terms(instance, &paths, pq)).collect(),
        ground,
        air,
        pca_crossings: crossings_by_pca(&paths, &per_q),
        path_flows: Some(flows(&paths, per_q, paths.iter().map(|p| p.bound).collect())),
        model: m,
    })
}
