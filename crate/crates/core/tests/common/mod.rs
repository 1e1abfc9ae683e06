//! Generators and independent oracles shared by the integration targets.
#![allow(dead_code)]

use ctop_core::ctop_engine::{AllocationResult, Inclusion, Program, SlotRef, SlotTable};
use ctop_core::lp_solver::{MathModel, Relation, VarId};
use ctop_core::network::{
    derive_split_ratios, CapacityProfile, CostParams, FcaCrossing, Flight, Horizon, Instance, NetworkArc, Path,
    Resource, ResourceKind, Scenario, ScenarioTree, Stage, TrajectoryOption,
};
use rand::Rng;
use std::collections::BTreeMap;

pub const ORACLE_TOL: f64 = 1e-7;

// ---------------------------------------------------------------- solver

/// Random bounded model over `n` variables with `m` constraints. Small
/// integer data; most instances are built around a known feasible lattice
/// point, the rest use arbitrary right-hand sides.
pub fn random_model(rng: &mut impl Rng, n: usize, m: usize, integer: bool) -> MathModel {
    let mut model = MathModel::new("random");
    let mut anchor = Vec::with_capacity(n);
    for j in 0..n {
        let upper = rng.gen_range(1..=5) as f64;
        let v = if integer {
            model.add_integer(format!("x{j}"), 0.0, upper)
        } else {
            model.add_continuous(format!("x{j}"), 0.0, upper)
        };
        model.add_objective_term(v, rng.gen_range(-5..=5) as f64);
        anchor.push(rng.gen_range(0..=upper as i64) as f64);
    }
    let anchored = rng.gen_bool(0.85);
    for i in 0..m {
        let coefs: Vec<f64> = (0..n).map(|_| rng.gen_range(-4..=4) as f64).collect();
        let at: f64 = coefs.iter().zip(&anchor).map(|(a, x)| a * x).sum();
        let (relation, rhs) = match rng.gen_range(0..10) {
            0 => (Relation::Eq, at),
            1..=3 => (Relation::Ge, at - rng.gen_range(0..=3) as f64),
            _ => (Relation::Le, at + rng.gen_range(0..=3) as f64),
        };
        let rhs = if anchored { rhs } else { rng.gen_range(-6..=6) as f64 };
        let terms = coefs.iter().enumerate().filter(|(_, &a)| a != 0.0).map(|(j, &a)| (VarId(j), a)).collect();
        model.add_constraint(format!("c{i}"), terms, relation, rhs);
    }
    model
}

fn feasible(model: &MathModel, x: &[f64], tol: f64) -> bool {
    model.variables.iter().zip(x).all(|(v, &xi)| xi >= v.lower - tol && xi <= v.upper + tol)
        && model.constraints.iter().all(|c| c.is_satisfied(x, tol))
}

/// Minimum over every integer point of the variable box.
pub fn lattice_min(model: &MathModel) -> Option<f64> {
    let lower: Vec<i64> = model.variables.iter().map(|v| v.lower.ceil() as i64).collect();
    let upper: Vec<i64> = model.variables.iter().map(|v| v.upper.floor() as i64).collect();
    let mut x = lower.clone();
    let mut best: Option<f64> = None;
    loop {
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        if feasible(model, &xf, 0.0) {
            let z = model.objective_value(&xf);
            best = Some(best.map_or(z, |b| b.min(z)));
        }
        let mut j = 0;
        loop {
            if j == x.len() {
                return best;
            }
            if x[j] < upper[j] {
                x[j] += 1;
                break;
            }
            x[j] = lower[j];
            j += 1;
        }
    }
}

/// Minimum over the basic solutions: every choice of `n` linearly
/// independent hyperplanes among constraints and bounds.
pub fn vertex_min(model: &MathModel) -> Option<f64> {
    let n = model.num_vars();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in &model.constraints {
        let mut row = vec![0.0; n];
        for &(v, a) in &c.terms {
            row[v.0] += a;
        }
        planes.push((row, c.rhs));
    }
    for (j, v) in model.variables.iter().enumerate() {
        for b in [v.lower, v.upper] {
            let mut row = vec![0.0; n];
            row[j] = 1.0;
            planes.push((row, b));
        }
    }
    let mut best: Option<f64> = None;
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        let a: Vec<Vec<f64>> = pick.iter().map(|&i| planes[i].0.clone()).collect();
        let b: Vec<f64> = pick.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = gauss(a, b) {
            if feasible(model, &x, 1e-9) {
                let z = model.objective_value(&x);
                best = Some(best.map_or(z, |w| w.min(z)));
            }
        }
        // Next combination in lexicographic order.
        let k = planes.len();
        let Some(i) = (0..n).rev().find(|&i| pick[i] < k - n + i) else { return best };
        pick[i] += 1;
        for j in i + 1..n {
            pick[j] = pick[j - 1] + 1;
        }
    }
}

fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[p][col].abs() < 1e-9 {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

// ---------------------------------------------------------------- models

/// Two FCAs and two PCAs. FCA0 reaches PCA0 directly and PCA1 one period
/// later; FCA1 reaches PCA1 directly. Scenarios agree before the branch
/// period and draw their own capacities afterwards.
pub fn random_instance(rng: &mut impl Rng, scenarios: usize) -> Instance {
    let active = 5;
    let padding = 4;
    let t_len = active + padding;
    let branch = rng.gen_range(1..=3);
    let probabilities: Vec<f64> = match scenarios {
        1 => vec![1.0],
        2 => vec![0.5, 0.5],
        _ => vec![0.3, 0.4, 0.3],
    };
    let mut by_resource = BTreeMap::new();
    for pca in ["PCA0", "PCA1"] {
        let rows: Vec<Vec<u32>> = (0..t_len)
            .map(|t| {
                if t >= active {
                    vec![12; scenarios]
                } else if t < branch {
                    vec![rng.gen_range(0..=3); scenarios]
                } else {
                    (0..scenarios).map(|_| rng.gen_range(0..=3)).collect()
                }
            })
            .collect();
        by_resource.insert(pca.to_string(), rows);
    }
    let stages = if scenarios == 1 {
        vec![Stage { start: 0, groups: vec![vec![0]] }]
    } else {
        vec![
            Stage { start: 0, groups: vec![(0..scenarios).collect()] },
            Stage { start: branch, groups: (0..scenarios).map(|q| vec![q]).collect() },
        ]
    };
    let routes = [("FCA0", 0usize), ("FCA0", 1), ("FCA1", 2)];
    let n = rng.gen_range(2..=9);
    let flights = (0..n)
        .map(|i| {
            let (fca, path) = routes[rng.gen_range(0..routes.len())];
            let time = rng.gen_range(0..(active as i64 - 1) * 900);
            Flight {
                id: format!("R{i:02}"),
                etd: time - rng.gen_range(0..2700),
                exempt: false,
                tos: vec![TrajectoryOption {
                    path,
                    fca_arrival_times: vec![FcaCrossing { fca: fca.into(), time }],
                    relative_cost: 0.0,
                }],
            }
        })
        .collect();
    let mut inst = Instance {
        name: "random".into(),
        horizon: Horizon { start_time: 0, active_periods: active, padding_periods: padding },
        resources: ["FCA0", "FCA1"]
            .map(|id| Resource { id: id.into(), kind: ResourceKind::Fca })
            .into_iter()
            .chain(["PCA0", "PCA1"].map(|id| Resource { id: id.into(), kind: ResourceKind::Pca }))
            .collect(),
        arcs: vec![
            arc("FCA0", "PCA0", 0, t_len),
            arc("FCA0", "PCA1", 1, t_len),
            arc("FCA1", "PCA1", 0, t_len),
        ],
        paths: vec![
            Path { id: 0, node_sequence: vec!["PCA0".into()], entry_fca: "FCA0".into() },
            Path { id: 1, node_sequence: vec!["PCA1".into()], entry_fca: "FCA0".into() },
            Path { id: 2, node_sequence: vec!["PCA1".into()], entry_fca: "FCA1".into() },
        ],
        scenario_tree: ScenarioTree {
            scenarios: probabilities
                .iter()
                .enumerate()
                .map(|(q, &p)| Scenario { name: format!("S{q}"), probability: p })
                .collect(),
            stages,
        },
        capacities: CapacityProfile { by_resource },
        flights,
        costs: CostParams::default(),
    };
    let ratios = derive_split_ratios(&inst.flights, &inst);
    inst.set_split_ratios(ratios);
    inst
}

fn arc(from: &str, to: &str, travel_time: usize, t_len: usize) -> NetworkArc {
    NetworkArc { from: from.into(), to: to.into(), travel_time, split_ratio: vec![1.0; t_len] }
}

/// One FCA feeding a chain of PCAs `K0 -> K1 -> ...` with the given
/// travel times between consecutive PCAs. `caps[node][t]`, one scenario.
pub fn tandem_instance(caps: &[Vec<u32>], gaps: &[usize]) -> Instance {
    let t_len = caps[0].len();
    let nodes: Vec<String> = (0..caps.len()).map(|i| format!("K{i}")).collect();
    let mut arcs = vec![arc("F", &nodes[0], 0, t_len)];
    for (i, &g) in gaps.iter().enumerate() {
        arcs.push(arc(&nodes[i], &nodes[i + 1], g, t_len));
    }
    let mut resources = vec![Resource { id: "F".into(), kind: ResourceKind::Fca }];
    resources.extend(nodes.iter().map(|id| Resource { id: id.clone(), kind: ResourceKind::Pca }));
    Instance {
        name: "tandem".into(),
        horizon: Horizon { start_time: 0, active_periods: t_len - 1, padding_periods: 1 },
        resources,
        arcs,
        paths: vec![Path { id: 0, node_sequence: nodes.clone(), entry_fca: "F".into() }],
        scenario_tree: ScenarioTree::single("S"),
        capacities: CapacityProfile {
            by_resource: nodes.iter().cloned().zip(caps.iter().map(|row| row.iter().map(|&c| vec![c]).collect())).collect(),
        },
        flights: Vec::new(),
        costs: CostParams::default(),
    }
}

/// First-come-first-served queue through a chain of PCAs: each period a
/// node passes as many waiting flights as its capacity allows, except that
/// nothing may leave so late that the next node is beyond the horizon.
/// Returns total holding periods, or `None` when flights are still queued
/// at the end.
pub fn fcfs_holding(arrivals: &[u32], caps: &[Vec<u32>], gaps: &[usize]) -> Option<u64> {
    let t_len = arrivals.len();
    let mut incoming = arrivals.to_vec();
    let mut total = 0u64;
    for (node, cap) in caps.iter().enumerate() {
        let next_gap = gaps.get(node).copied();
        let mut out = vec![0u32; t_len];
        let mut queue = 0u32;
        for t in 0..t_len {
            queue += incoming[t];
            let open = next_gap.is_none_or(|g| t + g < t_len);
            let pass = if open { queue.min(cap[t]) } else { 0 };
            queue -= pass;
            out[t] = pass;
            total += queue as u64;
        }
        if queue > 0 {
            return None;
        }
        if let Some(g) = next_gap {
            let mut shifted = vec![0u32; t_len];
            for t in 0..t_len {
                if t + g < t_len {
                    shifted[t + g] = out[t];
                }
            }
            incoming = shifted;
        }
    }
    Some(total)
}

// ---------------------------------------------------------------- allocation

/// Random flights over FCAs `A`, `B` and `C`. Options cross one or two
/// FCAs; some crossings fall outside the program window and some flights
/// are exempt.
pub fn random_flights(rng: &mut impl Rng, n: usize, horizon_s: i64) -> Vec<Flight> {
    const FCAS: [&str; 3] = ["A", "B", "C"];
    (0..n)
        .map(|i| {
            let k = rng.gen_range(1..=3);
            let tos = (0..k)
                .map(|j| {
                    let first = rng.gen_range(-900..horizon_s);
                    let mut crossings = vec![FcaCrossing { fca: FCAS[rng.gen_range(0..3)].into(), time: first }];
                    if rng.gen_bool(0.4) {
                        let second = first + rng.gen_range(300..2700);
                        crossings.push(FcaCrossing { fca: FCAS[rng.gen_range(0..3)].into(), time: second });
                    }
                    TrajectoryOption {
                        path: j,
                        fca_arrival_times: crossings,
                        relative_cost: if j == 0 { 0.0 } else { rng.gen_range(0..40) as f64 },
                    }
                })
                .collect();
            Flight { id: format!("F{:06}", rng.gen_range(0..1000) * 1000 + i), etd: 0, exempt: rng.gen_bool(0.15), tos }
        })
        .collect()
}

/// Program window membership, recomputed from the raw window bounds.
fn controls(program: &Program, fca: &str, time: i64) -> bool {
    program.windows.get(fca).is_some_and(|&(a, b)| time >= a && time < b)
}

/// Earliest free slot at or after `time`, by scanning every slot of the FCA.
fn scan_free(table: &SlotTable, taken: &BTreeMap<(usize, usize, usize), String>, fca: &str, time: i64) -> Option<(SlotRef, i64)> {
    let fi = table.fcas.iter().position(|f| f == fca)?;
    let mut best: Option<(SlotRef, i64)> = None;
    for (t, row) in table.slots[fi].iter().enumerate() {
        for (i, s) in row.iter().enumerate() {
            let at = table.start_time + 900 * t as i64 + s.offset;
            if at >= time && !taken.contains_key(&(fi, t, i)) && best.is_none_or(|(_, b)| at < b) {
                best = Some((SlotRef { fca: fi, period: t, index: i }, at));
            }
        }
    }
    best
}

/// Replays an allocation against a fresh slot table. Checks the processing
/// order, that every slot has at most one user, and that each included
/// flight took the cheapest option available at its turn. Returns one
/// message per violation.
pub fn audit_allocation(program: &Program, flights: &[Flight], fresh: &SlotTable, result: &AllocationResult) -> Vec<String> {
    let mut errors = Vec::new();
    let by_id: BTreeMap<&str, &Flight> = flights.iter().map(|f| (f.id.as_str(), f)).collect();
    let class = |f: &Flight| {
        let included = f.tos.iter().any(|o| o.fca_arrival_times.iter().any(|c| controls(program, &c.fca, c.time)));
        match (included, f.exempt) {
            (false, _) => 2,
            (true, true) => 0,
            (true, false) => 1,
        }
    };
    let iat = |f: &Flight| f.tos.iter().flat_map(|o| o.fca_arrival_times.iter().map(|c| c.time)).min().unwrap_or(i64::MAX);

    let mut expected: Vec<&Flight> = flights.iter().collect();
    expected.sort_by(|a, b| {
        let ka = (class(a), if class(a) == 2 { 0 } else { iat(a) }, &a.id);
        let kb = (class(b), if class(b) == 2 { 0 } else { iat(b) }, &b.id);
        ka.cmp(&kb)
    });
    let got: Vec<&str> = result.assignments.iter().map(|a| a.flight.as_str()).collect();
    let want: Vec<&str> = expected.iter().map(|f| f.id.as_str()).collect();
    if got != want {
        errors.push(format!("processing order {got:?} != {want:?}"));
        return errors;
    }

    let mut taken: BTreeMap<(usize, usize, usize), String> = BTreeMap::new();
    for a in &result.assignments {
        let f = by_id[a.flight.as_str()];
        let price = |o: usize, taken: &BTreeMap<_, _>| -> Option<(f64, Option<(SlotRef, i64)>, i64)> {
            let opt = &f.tos[o];
            match opt.fca_arrival_times.iter().find(|c| controls(program, &c.fca, c.time)) {
                None => Some((opt.relative_cost, None, 0)),
                Some(c) => {
                    let (r, at) = scan_free(fresh, taken, &c.fca, c.time)?;
                    Some(((at - c.time) as f64 / 60.0 + opt.relative_cost, Some((r, at)), at - c.time))
                }
            }
        };
        match class(f) {
            1 => {
                let quotes: Vec<Option<(f64, _, i64)>> = (0..f.tos.len()).map(|o| price(o, &taken)).collect();
                let Some(min) = quotes.iter().flatten().map(|q| q.0).min_by(f64::total_cmp) else {
                    errors.push(format!("{} was allocated although no option had a slot", f.id));
                    continue;
                };
                let first = quotes.iter().position(|q| q.as_ref().is_some_and(|q| q.0 == min)).unwrap();
                if a.option != first {
                    errors.push(format!("{} took option {} but option {first} costs {min}", f.id, a.option));
                }
                let (_, slot, delay) = quotes[first].unwrap();
                if a.slot != slot.map(|s| s.0) || a.ground_delay_s != delay {
                    errors.push(format!("{} slot {:?} delay {} != {:?} {}", f.id, a.slot, a.ground_delay_s, slot, delay));
                }
            }
            0 => {
                if a.option != 0 {
                    errors.push(format!("exempt {} moved to option {}", f.id, a.option));
                }
                let slot = price(0, &taken).and_then(|q| q.1);
                if a.slot != slot.map(|s| s.0) {
                    errors.push(format!("exempt {} slot {:?} != {:?}", f.id, a.slot, slot));
                }
            }
            _ => {
                if a.slot.is_some() || a.ground_delay_s != 0 || !a.marked.is_empty() {
                    errors.push(format!("excluded {} was controlled", f.id));
                }
            }
        }
        if a.inclusion != [Inclusion::Exempt, Inclusion::Included, Inclusion::Excluded][class(f)] {
            errors.push(format!("{} classified {:?}", f.id, a.inclusion));
        }
        let used = a.slot.into_iter().chain(a.marked.iter().map(|m| m.0));
        for r in used {
            if let Some(prev) = taken.insert((r.fca, r.period, r.index), f.id.clone()) {
                errors.push(format!("slot {r:?} used by {prev} and {}", f.id));
            }
        }
    }
    for (fi, per_t) in result.slots.slots.iter().enumerate() {
        for (t, row) in per_t.iter().enumerate() {
            for (i, s) in row.iter().enumerate() {
                if s.state.owner() != taken.get(&(fi, t, i)).map(String::as_str) {
                    errors.push(format!("slot ({fi},{t},{i}) ends {:?}, replay says {:?}", s.state, taken.get(&(fi, t, i))));
                }
            }
        }
    }
    errors
}

// ---------------------------------------------------------------- builders

/// Small single-scenario instance. Resources whose id starts with `F` are
/// FCAs, all others PCAs with a constant capacity. Each flight is
/// `(path, period)` and crosses the path's entry FCA at the start of that
/// period. The last two periods are padding.
pub fn mini_instance(
    arcs: &[(&str, &str, usize)],
    paths: &[(usize, &str, &[&str])],
    caps: &[(&str, u32)],
    t_len: usize,
    flights: &[(usize, usize)],
) -> Instance {
    let mut ids: Vec<&str> = arcs.iter().flat_map(|a| [a.0, a.1]).collect();
    ids.sort();
    ids.dedup();
    let resources = ids
        .iter()
        .map(|&id| Resource {
            id: id.into(),
            kind: if id.starts_with('F') { ResourceKind::Fca } else { ResourceKind::Pca },
        })
        .collect();
    let paths: Vec<Path> = paths
        .iter()
        .map(|&(id, fca, nodes)| Path {
            id,
            node_sequence: nodes.iter().map(|n| n.to_string()).collect(),
            entry_fca: fca.into(),
        })
        .collect();
    let flights = flights
        .iter()
        .enumerate()
        .map(|(i, &(path, t))| {
            let p = paths.iter().find(|p| p.id == path).expect("known path");
            Flight {
                id: format!("M{i:02}"),
                etd: 0,
                exempt: false,
                tos: vec![TrajectoryOption {
                    path,
                    fca_arrival_times: vec![FcaCrossing { fca: p.entry_fca.clone(), time: 900 * t as i64 }],
                    relative_cost: 0.0,
                }],
            }
        })
        .collect();
    let mut inst = Instance {
        name: "mini".into(),
        horizon: Horizon { start_time: 0, active_periods: t_len - 2, padding_periods: 2 },
        resources,
        arcs: arcs.iter().map(|&(a, b, tt)| arc(a, b, tt, t_len)).collect(),
        paths,
        scenario_tree: ScenarioTree::single("S"),
        capacities: CapacityProfile {
            by_resource: caps.iter().map(|&(id, c)| (id.to_string(), vec![vec![c]; t_len])).collect(),
        },
        flights,
        costs: CostParams::default(),
    };
    let ratios = derive_split_ratios(&inst.flights, &inst);
    inst.set_split_ratios(ratios);
    inst
}
