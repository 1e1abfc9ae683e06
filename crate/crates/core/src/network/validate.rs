use super::{derive_demand, Instance, ResourceKind};
use std::collections::{HashMap, HashSet};
use std::fmt;

const SUM_TOL: f64 = 1e-9;

/// One problem found in an instance.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateResource(String),
    EmptyHorizon,
    UnknownArcEndpoint { from: String, to: String, missing: String },
    SelfLoop(String),
    PcaBeforeFca { from: String, to: String },
    SplitRatioLength { from: String, to: String, len: usize, expected: usize },
    SplitRatioRange { from: String, to: String, period: usize, value: f64 },
    SplitRatioSum { resource: String, period: usize, sum: f64 },
    Cycle(String),
    NoScenarios,
    ProbabilitySum(f64),
    NonPositiveProbability { scenario: String, probability: f64 },
    StageOrder(String),
    StagePartition { stage: usize, message: String },
    StageNesting { stage: usize, group: usize },
    BranchCapacity { stage: usize, resource: String, period: usize, scenarios: (usize, usize) },
    MissingCapacity { resource: String },
    CapacityShape { resource: String, message: String },
    CapacityOnNonPca(String),
    PathInvalid { path: usize, message: String },
    DuplicatePath(usize),
    InsufficientPadding { path: usize, needed: usize, padding: usize },
    FlightInvalid { flight: String, message: String },
    DuplicateFlight(String),
    Demand(String),
    CostParams(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            DuplicateResource(id) => write!(f, "duplicate resource id `{id}`"),
            EmptyHorizon => write!(f, "horizon has no active periods"),
            UnknownArcEndpoint { from, to, missing } => write!(f, "arc {from}->{to} references unknown resource `{missing}`"),
            SelfLoop(r) => write!(f, "arc {r}->{r} is a self loop"),
            PcaBeforeFca { from, to } => write!(f, "arc {from}->{to} leads from a PCA into an FCA"),
            SplitRatioLength { from, to, len, expected } => {
                write!(f, "arc {from}->{to} has {len} split ratios, expected {expected}")
            }
            SplitRatioRange { from, to, period, value } => {
                write!(f, "arc {from}->{to} split ratio {value} at period {period} is outside [0, 1]")
            }
            SplitRatioSum { resource, period, sum } => {
                write!(f, "split ratios out of {resource} at period {period} sum to {}", tidy(*sum))
            }
            Cycle(r) => write!(f, "network has a cycle through {r}"),
            NoScenarios => write!(f, "scenario tree has no scenarios"),
            ProbabilitySum(sum) => write!(f, "probabilities sum to {}", tidy(*sum)),
            NonPositiveProbability { scenario, probability } => {
                write!(f, "scenario {scenario} has non-positive probability {probability}")
            }
            StageOrder(msg) => write!(f, "stages: {msg}"),
            StagePartition { stage, message } => write!(f, "stage {stage}: {message}"),
            StageNesting { stage, group } => {
                write!(f, "stage {stage} group {group} is not contained in a group of the previous stage")
            }
            BranchCapacity { stage, resource, period, scenarios } => write!(
                f,
                "scenarios {} and {} share a branch in stage {stage} but differ at {resource} period {period}",
                scenarios.0, scenarios.1
            ),
            MissingCapacity { resource } => write!(f, "PCA {resource} has no capacity profile"),
            CapacityShape { resource, message } => write!(f, "capacity of {resource}: {message}"),
            CapacityOnNonPca(r) => write!(f, "capacity given for `{r}`, which is not a PCA"),
            PathInvalid { path, message } => write!(f, "path {path}: {message}"),
            DuplicatePath(id) => write!(f, "duplicate path id {id}"),
            InsufficientPadding { path, needed, padding } => {
                write!(f, "path {path} needs {needed} padding periods, horizon has {padding}")
            }
            FlightInvalid { flight, message } => write!(f, "flight {flight}: {message}"),
            DuplicateFlight(id) => write!(f, "duplicate flight id `{id}`"),
            Demand(msg) => write!(f, "demand: {msg}"),
            CostParams(msg) => write!(f, "costs: {msg}"),
        }
    }
}

/// Rounds away binary noise so that 0.5 + 0.6 prints as 1.1.
fn tidy(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn messages(&self) -> Vec<String> {
        self.violations.iter().map(|v| v.to_string()).collect()
    }
}

/// Collects every structural problem of `instance`; never fails.
pub fn validate_instance(instance: &Instance) -> ValidationReport {
    let mut out = Vec::new();
    let t_len = instance.num_periods();
    if instance.horizon.active_periods == 0 {
        out.push(Violation::EmptyHorizon);
    }

    let mut kinds: HashMap<&str, ResourceKind> = HashMap::new();
    for r in &instance.resources {
        if kinds.insert(r.id.as_str(), r.kind).is_some() {
            out.push(Violation::DuplicateResource(r.id.clone()));
        }
    }

    check_arcs(instance, &kinds, t_len, &mut out);
    check_tree(instance, t_len, &mut out);
    check_capacities(instance, &kinds, t_len, &mut out);
    let paths_ok = check_paths(instance, &kinds, &mut out);
    check_flights(instance, &kinds, &mut out);

    let c = instance.costs;
    if !(c.ground.is_finite() && c.ground >= 0.0 && c.air.is_finite() && c.air >= 0.0) {
        out.push(Violation::CostParams(format!("ground {} and air {} must be finite and non-negative", c.ground, c.air)));
    }

    if paths_ok {
        match derive_demand(&instance.flights, instance) {
            Ok(d) => {
                if let Err(msg) = d.check_consistency() {
                    out.push(Violation::Demand(msg));
                }
            }
            Err(e) => out.push(Violation::Demand(e.to_string())),
        }
    }

    ValidationReport { violations: out }
}

fn check_arcs(instance: &Instance, kinds: &HashMap<&str, ResourceKind>, t_len: usize, out: &mut Vec<Violation>) {
    let mut outgoing: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, a) in instance.arcs.iter().enumerate() {
        let mut known = true;
        for end in [&a.from, &a.to] {
            if !kinds.contains_key(end.as_str()) {
                out.push(Violation::UnknownArcEndpoint { from: a.from.clone(), to: a.to.clone(), missing: end.clone() });
                known = false;
            }
        }
        if a.from == a.to {
            out.push(Violation::SelfLoop(a.from.clone()));
        }
        if known && kinds[a.from.as_str()] == ResourceKind::Pca && kinds[a.to.as_str()] == ResourceKind::Fca {
            out.push(Violation::PcaBeforeFca { from: a.from.clone(), to: a.to.clone() });
        }
        if a.split_ratio.len() != t_len {
            out.push(Violation::SplitRatioLength {
                from: a.from.clone(),
                to: a.to.clone(),
                len: a.split_ratio.len(),
                expected: t_len,
            });
        }
        for (t, &v) in a.split_ratio.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                out.push(Violation::SplitRatioRange { from: a.from.clone(), to: a.to.clone(), period: t, value: v });
            }
        }
        outgoing.entry(a.from.as_str()).or_default().push(i);
    }

    // Sum rule, in resource declaration order for stable reports.
    for r in &instance.resources {
        let Some(arcs) = outgoing.get(r.id.as_str()) else { continue };
        for t in 0..t_len {
            let sum: f64 = arcs.iter().filter_map(|&i| instance.arcs[i].split_ratio.get(t)).sum();
            if (sum - 1.0).abs() > SUM_TOL {
                out.push(Violation::SplitRatioSum { resource: r.id.clone(), period: t, sum });
            }
        }
    }

    // Kahn's algorithm for acyclicity.
    let mut indeg: HashMap<&str, usize> = kinds.keys().map(|k| (*k, 0)).collect();
    for a in &instance.arcs {
        if let Some(d) = indeg.get_mut(a.to.as_str()) {
            *d += 1;
        }
    }
    let mut queue: Vec<&str> = instance.resources.iter().map(|r| r.id.as_str()).filter(|id| indeg[id] == 0).collect();
    let mut seen = 0;
    while let Some(r) = queue.pop() {
        seen += 1;
        for &i in outgoing.get(r).map(Vec::as_slice).unwrap_or(&[]) {
            if let Some(d) = indeg.get_mut(instance.arcs[i].to.as_str()) {
                *d -= 1;
                if *d == 0 {
                    queue.push(instance.arcs[i].to.as_str());
                }
            }
        }
    }
    if seen < indeg.len() {
        let stuck = instance.resources.iter().find(|r| indeg.get(r.id.as_str()).is_some_and(|&d| d > 0));
        out.push(Violation::Cycle(stuck.map_or_else(String::new, |r| r.id.clone())));
    }
}

fn check_tree(instance: &Instance, t_len: usize, out: &mut Vec<Violation>) {
    let tree = &instance.scenario_tree;
    let q_len = tree.len();
    if q_len == 0 {
        out.push(Violation::NoScenarios);
        return;
    }
    let sum: f64 = tree.scenarios.iter().map(|s| s.probability).sum();
    if (sum - 1.0).abs() > SUM_TOL {
        out.push(Violation::ProbabilitySum(sum));
    }
    for s in &tree.scenarios {
        if !(s.probability > 0.0) {
            out.push(Violation::NonPositiveProbability { scenario: s.name.clone(), probability: s.probability });
        }
    }
    if tree.stages.is_empty() {
        out.push(Violation::StageOrder("no stages".into()));
        return;
    }
    if tree.stages[0].start != 0 {
        out.push(Violation::StageOrder(format!("first stage starts at {}, expected 0", tree.stages[0].start)));
    }
    for w in tree.stages.windows(2) {
        if w[1].start <= w[0].start {
            out.push(Violation::StageOrder(format!("start {} does not follow {}", w[1].start, w[0].start)));
        }
    }
    if let Some(last) = tree.stages.last() {
        if last.start >= t_len.max(1) {
            out.push(Violation::StageOrder(format!("stage start {} is beyond the horizon", last.start)));
        }
    }

    let mut partitions_ok = true;
    for (s, stage) in tree.stages.iter().enumerate() {
        let mut count = vec![0usize; q_len];
        for g in &stage.groups {
            if g.is_empty() {
                out.push(Violation::StagePartition { stage: s, message: "empty group".into() });
                partitions_ok = false;
            }
            for &q in g {
                match count.get_mut(q) {
                    Some(c) => *c += 1,
                    None => {
                        out.push(Violation::StagePartition { stage: s, message: format!("unknown scenario {q}") });
                        partitions_ok = false;
                    }
                }
            }
        }
        for (q, &c) in count.iter().enumerate() {
            if c != 1 {
                out.push(Violation::StagePartition { stage: s, message: format!("scenario {q} appears in {c} groups") });
                partitions_ok = false;
            }
        }
    }
    if !partitions_ok {
        return;
    }

    for s in 1..tree.stages.len() {
        for (gi, g) in tree.stages[s].groups.iter().enumerate() {
            let nested = tree.stages[s - 1].groups.iter().any(|parent| g.iter().all(|q| parent.contains(q)));
            if !nested {
                out.push(Violation::StageNesting { stage: s, group: gi });
            }
        }
    }

    // Scenarios sharing a branch must agree on capacity until the branch resolves.
    let mut reported = HashSet::new();
    for (s, stage) in tree.stages.iter().enumerate() {
        let end = tree.stage_end(s, t_len).min(t_len);
        for g in &stage.groups {
            let Some(&lead) = g.first() else { continue };
            for &q in &g[1..] {
                for (res, table) in &instance.capacities.by_resource {
                    for (t, row) in table.iter().enumerate().take(end) {
                        if let (Some(a), Some(b)) = (row.get(lead), row.get(q)) {
                            if a != b && reported.insert((lead, q, res.clone())) {
                                out.push(Violation::BranchCapacity {
                                    stage: s,
                                    resource: res.clone(),
                                    period: t,
                                    scenarios: (lead, q),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
}

fn check_capacities(instance: &Instance, kinds: &HashMap<&str, ResourceKind>, t_len: usize, out: &mut Vec<Violation>) {
    let q_len = instance.num_scenarios();
    for (res, table) in &instance.capacities.by_resource {
        if kinds.get(res.as_str()) != Some(&ResourceKind::Pca) {
            out.push(Violation::CapacityOnNonPca(res.clone()));
            continue;
        }
        if table.len() != t_len {
            out.push(Violation::CapacityShape {
                resource: res.clone(),
                message: format!("{} periods, expected {t_len}", table.len()),
            });
        }
        if let Some((t, row)) = table.iter().enumerate().find(|(_, row)| row.len() != q_len) {
            out.push(Violation::CapacityShape {
                resource: res.clone(),
                message: format!("period {t} has {} scenario values, expected {q_len}", row.len()),
            });
        }
    }
    for r in &instance.resources {
        if r.kind == ResourceKind::Pca && !instance.capacities.by_resource.contains_key(&r.id) {
            out.push(Violation::MissingCapacity { resource: r.id.clone() });
        }
    }
}

/// Returns false when some path is broken badly enough that demand cannot be
/// derived.
fn check_paths(instance: &Instance, kinds: &HashMap<&str, ResourceKind>, out: &mut Vec<Violation>) -> bool {
    let mut ok = true;
    let mut ids = HashSet::new();
    for p in &instance.paths {
        if !ids.insert(p.id) {
            out.push(Violation::DuplicatePath(p.id));
        }
        let mut bad = |message: String| {
            out.push(Violation::PathInvalid { path: p.id, message });
        };
        if p.node_sequence.is_empty() {
            bad("empty node sequence".into());
            ok = false;
            continue;
        }
        if kinds.get(p.entry_fca.as_str()) != Some(&ResourceKind::Fca) {
            bad(format!("entry `{}` is not an FCA", p.entry_fca));
            ok = false;
        }
        for n in &p.node_sequence {
            if kinds.get(n.as_str()) != Some(&ResourceKind::Pca) {
                bad(format!("node `{n}` is not a PCA"));
                ok = false;
            }
        }
        if instance.arc(&p.entry_fca, &p.node_sequence[0]).is_none() {
            bad(format!("no arc from entry {} to {}", p.entry_fca, p.node_sequence[0]));
            ok = false;
        }
        for w in p.node_sequence.windows(2) {
            if instance.arc(&w[0], &w[1]).is_none() {
                bad(format!("no arc {}->{}", w[0], w[1]));
                ok = false;
            }
        }
        if let Ok(offsets) = instance.path_offsets(p) {
            let needed = offsets.last().copied().unwrap_or(0);
            if needed > instance.horizon.padding_periods {
                out.push(Violation::InsufficientPadding { path: p.id, needed, padding: instance.horizon.padding_periods });
            }
        }
    }
    ok
}

fn check_flights(instance: &Instance, kinds: &HashMap<&str, ResourceKind>, out: &mut Vec<Violation>) {
    let mut ids = HashSet::new();
    for f in &instance.flights {
        if !ids.insert(f.id.as_str()) {
            out.push(Violation::DuplicateFlight(f.id.clone()));
        }
        let mut bad = |message: String| out.push(Violation::FlightInvalid { flight: f.id.clone(), message });
        if f.tos.is_empty() {
            bad("no trajectory options".into());
            continue;
        }
        if f.tos[0].relative_cost != 0.0 {
            bad(format!("first option has relative cost {}", f.tos[0].relative_cost));
        }
        for (k, o) in f.tos.iter().enumerate() {
            if !(o.relative_cost.is_finite() && o.relative_cost >= 0.0) {
                bad(format!("option {k} has relative cost {}", o.relative_cost));
            }
            let Some(path) = instance.path(o.path) else {
                bad(format!("option {k} references unknown path {}", o.path));
                continue;
            };
            match o.entry() {
                None => bad(format!("option {k} crosses no FCA")),
                Some(c) if c.fca != path.entry_fca => {
                    bad(format!("option {k} enters at {} but path {} is controlled by {}", c.fca, path.id, path.entry_fca))
                }
                Some(_) => {}
            }
            for c in &o.fca_arrival_times {
                if kinds.get(c.fca.as_str()) != Some(&ResourceKind::Fca) {
                    bad(format!("option {k} crosses `{}`, which is not an FCA", c.fca));
                }
            }
            if o.fca_arrival_times.windows(2).any(|w| w[1].time <= w[0].time) {
                bad(format!("option {k} crossing times are not strictly increasing"));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{paper_fixture, FixtureOptions};

    #[test]
    fn fixture_is_valid() {
        let inst = paper_fixture(&FixtureOptions::default());
        let report = validate_instance(&inst);
        assert!(report.is_valid(), "{:?}", report.messages());
    }

    #[test]
    fn bad_split_sum_names_resource_and_period() {
        let mut inst = paper_fixture(&FixtureOptions::default());
        let to_ewr = inst.arc("PCA0", "EWR").unwrap().split_ratio[5];
        let arc = inst.arcs.iter_mut().find(|a| a.from == "PCA0" && a.to == "EXIT").unwrap();
        arc.split_ratio[5] = 0.9 - to_ewr;
        let report = validate_instance(&inst);
        let msgs = report.messages();
        assert!(msgs.iter().any(|m| m.contains("PCA0") && m.contains("period 5") && m.contains("0.9")), "{msgs:?}");
    }

    #[test]
    fn probability_sum_is_reported() {
        let mut inst = paper_fixture(&FixtureOptions::default());
        inst.scenario_tree.scenarios.truncate(2);
        inst.scenario_tree.scenarios[0].probability = 0.5;
        inst.scenario_tree.scenarios[1].probability = 0.6;
        let msgs = validate_instance(&inst).messages();
        assert!(msgs.iter().any(|m| m == "probabilities sum to 1.1"), "{msgs:?}");
    }

    #[test]
    fn cycle_is_reported() {
        let mut inst = paper_fixture(&FixtureOptions::default());
        let t = inst.num_periods();
        inst.arcs.push(crate::network::NetworkArc {
            from: "EWR".into(),
            to: "PCA0".into(),
            travel_time: 1,
            split_ratio: vec![1.0; t],
        });
        let msgs = validate_instance(&inst).messages();
        assert!(msgs.iter().any(|m| m.contains("cycle")), "{msgs:?}");
    }

    #[test]
    fn pca_into_fca_is_reported() {
        let mut inst = paper_fixture(&FixtureOptions::default());
        let t = inst.num_periods();
        inst.arcs.push(crate::network::NetworkArc {
            from: "EWR".into(),
            to: "FCA0".into(),
            travel_time: 1,
            split_ratio: vec![1.0; t],
        });
        let report = validate_instance(&inst);
        assert!(report.violations.iter().any(|v| matches!(v, Violation::PcaBeforeFca { .. })));
    }

    #[test]
    fn branch_capacity_mismatch_is_reported() {
        let mut inst = paper_fixture(&FixtureOptions::default());
        // Scenarios 1 and 2 share a branch until period 10.
        inst.capacities.by_resource.get_mut("PCA1").unwrap()[6][2] = 1;
        let report = validate_instance(&inst);
        assert!(report.violations.iter().any(|v| matches!(v, Violation::BranchCapacity { .. })));
    }

    #[test]
    fn short_padding_is_reported() {
        let mut inst = paper_fixture(&FixtureOptions { flights: 0, ..Default::default() });
        inst.horizon.padding_periods = 2;
        for a in &mut inst.arcs {
            a.split_ratio.truncate(inst.horizon.len());
        }
        for table in inst.capacities.by_resource.values_mut() {
            table.truncate(inst.horizon.len());
        }
        let report = validate_instance(&inst);
        assert!(report.violations.iter().any(|v| matches!(v, Violation::InsufficientPadding { needed: 3, .. })));
    }
}
