//! Aggregate FCA-PCA models: flights are homogeneous flow split between
//! resources by pre-computed ratios.

use super::{BuiltModel, ModelKind};
use crate::lp_solver::{MathModel, Relation, VarId};
use crate::network::{DemandMatrix, Instance, ResourceKind};
use std::collections::{BTreeMap, HashMap};

/// Resource lists and incoming arcs with their split ratios.
struct Net<'a> {
    fcas: Vec<&'a str>,
    pcas: Vec<&'a str>,
    fca_pos: HashMap<&'a str, usize>,
    pca_pos: HashMap<&'a str, usize>,
    /// target -> (source, travel time, ratio per period)
    incoming: HashMap<&'a str, Vec<(&'a str, usize, &'a [f64])>>,
}

impl<'a> Net<'a> {
    fn new(instance: &'a Instance, ratios: &'a [Vec<f64>]) -> Self {
        let fcas = instance.fcas();
        let pcas = instance.pcas();
        let fca_pos = fcas.iter().enumerate().map(|(i, r)| (*r, i)).collect();
        let pca_pos = pcas.iter().enumerate().map(|(i, r)| (*r, i)).collect();
        let mut incoming: HashMap<&str, Vec<_>> = HashMap::new();
        for (a, f) in instance.arcs.iter().zip(ratios) {
            incoming.entry(a.to.as_str()).or_default().push((a.from.as_str(), a.travel_time, f.as_slice()));
        }
        Self { fcas, pcas, fca_pos, pca_pos, incoming }
    }

    /// Terms `f * P` (upstream FCAs) and `f * L` (upstream PCAs) arriving at
    /// `target` in period `t`.
    fn upstream(
        &self,
        instance: &Instance,
        target: &str,
        t: usize,
        fca_var: impl Fn(usize, usize) -> VarId,
        pca_var: impl Fn(usize, usize) -> VarId,
    ) -> Vec<(VarId, f64)> {
        let mut terms = Vec::new();
        for &(src, lag, f) in self.incoming.get(target).map(Vec::as_slice).unwrap_or(&[]) {
            let Some(t0) = t.checked_sub(lag) else { continue };
            let ratio = f.get(t0).copied().unwrap_or(0.0);
            if ratio == 0.0 {
                continue;
            }
            match instance.kind_of(src) {
                Some(ResourceKind::Fca) => terms.push((fca_var(self.fca_pos[src], t0), ratio)),
                Some(ResourceKind::Pca) => terms.push((pca_var(self.pca_pos[src], t0), ratio)),
                None => {}
            }
        }
        terms
    }
}

fn neg(terms: Vec<(VarId, f64)>) -> impl Iterator<Item = (VarId, f64)> {
    terms.into_iter().map(|(v, a)| (v, -a))
}

/// PCA crossing and hold variables for every scenario, plus the rows tying
/// crossings to upstream flow. `fca_var(q, fca, t)` supplies the FCA rate
/// variable seen by scenario `q`.
#[allow(clippy::type_complexity)]
fn add_pca_layer(
    m: &mut MathModel,
    instance: &Instance,
    net: &Net,
    bound: f64,
    fca_var: &dyn Fn(usize, usize, usize) -> VarId,
) -> (Vec<Vec<Vec<VarId>>>, Vec<Vec<Vec<VarId>>>) {
    let t_len = instance.num_periods();
    let q_len = instance.num_scenarios();
    let mut l = vec![vec![Vec::with_capacity(t_len); q_len]; net.pcas.len()];
    let mut a = l.clone();
    for (k, &pca) in net.pcas.iter().enumerate() {
        for q in 0..q_len {
            for t in 0..t_len {
                let cap = (instance.capacity(pca, t, q) as f64).min(bound);
                l[k][q].push(m.add_continuous(format!("L_{pca}_q{q}_t{t}"), 0.0, cap));
                let a_ub = if t + 1 == t_len { 0.0 } else { bound };
                a[k][q].push(m.add_continuous(format!("A_{pca}_q{q}_t{t}"), 0.0, a_ub));
            }
        }
    }
    for (k, &pca) in net.pcas.iter().enumerate() {
        for q in 0..q_len {
            for t in 0..t_len {
                // L = UpFCA + UpPCA - (A_t - A_{t-1})
                let up = net.upstream(instance, pca, t, |f, t0| fca_var(q, f, t0), |p, t0| l[p][q][t0]);
                let mut terms = vec![(l[k][q][t], 1.0), (a[k][q][t], 1.0)];
                if t > 0 {
                    terms.push((a[k][q][t - 1], -1.0));
                }
                terms.extend(neg(up));
                m.add_constraint(format!("flow_{pca}_q{q}_t{t}"), terms, Relation::Eq, 0.0);
            }
        }
    }
    (l, a)
}

fn crossings_map(net: &Net, l: &[Vec<Vec<VarId>>]) -> BTreeMap<String, Vec<Vec<Vec<VarId>>>> {
    net.pcas
        .iter()
        .enumerate()
        .map(|(k, p)| (p.to_string(), l[k].iter().map(|per_q| per_q.iter().map(|&v| vec![v]).collect()).collect()))
        .collect()
}

fn demand_row<'d>(demand: &'d DemandMatrix, fca: &str) -> Option<&'d [u32]> {
    demand.fca(fca)
}

/// Static model: one set of FCA rates for all scenarios, ground delay planned
/// on direct demand, scenario-specific air holding at PCAs. `split_ratios` is
/// aligned with `instance.arcs`. Solve as an LP.
pub fn build_esom(instance: &Instance, demand: &DemandMatrix, split_ratios: &[Vec<f64>]) -> BuiltModel {
    let net = Net::new(instance, split_ratios);
    let t_len = instance.num_periods();
    let bound = demand.total() as f64;
    let probs = instance.scenario_tree.probabilities();
    let costs = instance.costs;
    let mut m = MathModel::new("esom");

    let mut g = vec![Vec::with_capacity(t_len); net.fcas.len()];
    let mut p_direct = g.clone();
    let mut p = g.clone();
    for (r, &fca) in net.fcas.iter().enumerate() {
        for t in 0..t_len {
            let g_ub = if t + 1 == t_len { 0.0 } else { bound };
            g[r].push(m.add_continuous(format!("G_{fca}_t{t}"), 0.0, g_ub));
            p_direct[r].push(m.add_continuous(format!("Pd_{fca}_t{t}"), 0.0, bound));
            p[r].push(m.add_continuous(format!("P_{fca}_t{t}"), 0.0, bound));
        }
    }
    for (r, &fca) in net.fcas.iter().enumerate() {
        let d = demand_row(demand, fca);
        for t in 0..t_len {
            // P~_t = D_t - (G_t - G_{t-1})
            let mut terms = vec![(p_direct[r][t], 1.0), (g[r][t], 1.0)];
            if t > 0 {
                terms.push((g[r][t - 1], -1.0));
            }
            let rhs = d.map_or(0.0, |row| row[t] as f64);
            m.add_constraint(format!("ground_{fca}_t{t}"), terms, Relation::Eq, rhs);
            // P_t = UpFCA_t + P~_t
            let up = net.upstream(instance, fca, t, |f, t0| p[f][t0], |_, _| unreachable!("PCA upstream of FCA"));
            let mut terms = vec![(p[r][t], 1.0), (p_direct[r][t], -1.0)];
            terms.extend(neg(up));
            m.add_constraint(format!("rate_{fca}_t{t}"), terms, Relation::Eq, 0.0);
        }
    }
    let (l, a) = add_pca_layer(&mut m, instance, &net, bound, &|_, f, t| p[f][t]);

    let mut ground = Vec::new();
    for row in &g {
        for &v in row {
            m.add_objective_term(v, costs.ground);
            ground.push((None, v, 1.0));
        }
    }
    let mut air = Vec::new();
    for per_pca in &a {
        for (q, row) in per_pca.iter().enumerate() {
            for &v in row {
                m.add_objective_term(v, costs.air * probs[q]);
                air.push((q, v));
            }
        }
    }
    BuiltModel {
        kind: ModelKind::Esom,
        pca_crossings: crossings_map(&net, &l),
        model: m,
        fcas: net.fcas.iter().map(|s| s.to_string()).collect(),
        rate_terms: vec![p.iter().map(|row| row.iter().map(|&v| vec![v]).collect()).collect()],
        ground,
        air,
        path_flows: None,
    }
}

/// Multistage variant: flights departing in stage `s` are rescheduled by
/// `X[q][s][t][t']` with decisions shared by scenarios that are still on one
/// branch of the tree in stage `s`. Rates become scenario dependent. Solve as
/// an LP.
pub fn build_semidynamic_esom(instance: &Instance, demand: &DemandMatrix, split_ratios: &[Vec<f64>]) -> BuiltModel {
    let net = Net::new(instance, split_ratios);
    let t_len = instance.num_periods();
    let q_len = instance.num_scenarios();
    let tree = &instance.scenario_tree;
    let bound = demand.total() as f64;
    let probs = tree.probabilities();
    let costs = instance.costs;
    let mut m = MathModel::new("sd-esom");

    // (fca, stage, t) cells with scheduled flights.
    let mut cells = Vec::new();
    for (r, &fca) in net.fcas.iter().enumerate() {
        let Some(fi) = demand.fca_index(fca) else { continue };
        for (s, per_stage) in demand.by_stage.iter().enumerate() {
            for (t, &n) in per_stage[fi].iter().enumerate() {
                if n > 0 {
                    cells.push((r, s, t, n as f64));
                }
            }
        }
    }

    // x[q][cell][t' - t]
    let mut x: Vec<Vec<Vec<VarId>>> = vec![Vec::with_capacity(cells.len()); q_len];
    let mut ground = Vec::new();
    for (q, xq) in x.iter_mut().enumerate() {
        for &(r, s, t, n) in &cells {
            let fca = net.fcas[r];
            let vars: Vec<VarId> = (t..t_len)
                .map(|t2| {
                    let v = m.add_continuous(format!("X_{fca}_q{q}_s{s}_t{t}_to{t2}"), 0.0, n);
                    let delay = (t2 - t) as f64;
                    if delay > 0.0 {
                        m.add_objective_term(v, probs[q] * costs.ground * delay);
                        ground.push((Some(q), v, delay));
                    }
                    v
                })
                .collect();
            m.add_constraint(
                format!("sched_{fca}_q{q}_s{s}_t{t}"),
                vars.iter().map(|&v| (v, 1.0)).collect(),
                Relation::Eq,
                n,
            );
            xq.push(vars);
        }
    }

    let mut p = vec![vec![Vec::with_capacity(t_len); net.fcas.len()]; q_len];
    for (q, pq) in p.iter_mut().enumerate() {
        for (r, &fca) in net.fcas.iter().enumerate() {
            for t in 0..t_len {
                pq[r].push(m.add_continuous(format!("P_{fca}_q{q}_t{t}"), 0.0, bound));
            }
        }
    }
    for q in 0..q_len {
        for (r, &fca) in net.fcas.iter().enumerate() {
            for t in 0..t_len {
                // P_{t,q} = UpFCA_{t,q} + released direct flights
                let up = net.upstream(instance, fca, t, |f, t0| p[q][f][t0], |_, _| unreachable!("PCA upstream of FCA"));
                let mut terms = vec![(p[q][r][t], 1.0)];
                terms.extend(neg(up));
                for (c, &(cr, _, t0, _)) in cells.iter().enumerate() {
                    if cr == r && t0 <= t {
                        terms.push((x[q][c][t - t0], -1.0));
                    }
                }
                m.add_constraint(format!("rate_{fca}_q{q}_t{t}"), terms, Relation::Eq, 0.0);
            }
        }
    }

    // Nonanticipativity: stage-s reschedules agree across each stage-s branch.
    for (c, &(r, s, t, _)) in cells.iter().enumerate() {
        let Some(stage) = tree.stages.get(s) else { continue };
        for group in &stage.groups {
            let Some((&lead, rest)) = group.split_first() else { continue };
            for &q in rest {
                for (k, t2) in (t..t_len).enumerate() {
                    m.add_constraint(
                        format!("nonant_{}_s{s}_t{t}_to{t2}_q{q}", net.fcas[r]),
                        vec![(x[q][c][k], 1.0), (x[lead][c][k], -1.0)],
                        Relation::Eq,
                        0.0,
                    );
                }
            }
        }
    }

    let (l, a) = add_pca_layer(&mut m, instance, &net, bound, &|q, f, t| p[q][f][t]);
    let mut air = Vec::new();
    for per_pca in &a {
        for (q, row) in per_pca.iter().enumerate() {
            for &v in row {
                m.add_objective_term(v, costs.air * probs[q]);
                air.push((q, v));
            }
        }
    }

    BuiltModel {
        kind: ModelKind::SemiDynamicEsom,
        pca_crossings: crossings_map(&net, &l),
        model: m,
        fcas: net.fcas.iter().map(|s| s.to_string()).collect(),
        rate_terms: p.iter().map(|pq| pq.iter().map(|row| row.iter().map(|&v| vec![v]).collect()).collect()).collect(),
        ground,
        air,
        path_flows: None,
    }
}
