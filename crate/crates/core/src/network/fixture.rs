//! Built-in instances: the four-hour ZDC/EWR weather case with three
//! capacity scenarios, and a tiny network whose split ratios flip between
//! two periods.

use super::{
    derive_split_ratios, CapacityProfile, CostParams, FcaCrossing, Flight, Horizon, Instance, NetworkArc, Path,
    Resource, ResourceKind, Scenario, ScenarioTree, Stage, TrajectoryOption, PERIOD_SECONDS,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// 20:00 in seconds after midnight.
const START: i64 = 20 * 3600;
const ACTIVE: usize = 16;
const PADDING: usize = 8;
/// Capacity of the sink that absorbs flights leaving the constrained airspace.
const EXIT_CAPACITY: u32 = 999;

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureOptions {
    /// Number of synthetic flights.
    pub flights: usize,
    pub seed: u64,
    pub costs: CostParams,
    pub probabilities: [f64; 3],
}

impl Default for FixtureOptions {
    fn default() -> Self {
        Self { flights: 50, seed: 7, costs: CostParams::default(), probabilities: [0.3, 0.4, 0.3] }
    }
}

// (pca, reduced, nominal) per scenario; reductions last 4, 10 and 16 periods.
const REDUCED: [(&str, u32, u32); 4] = [("PCA0", 13, 25), ("PCA1", 44, 50), ("PCA2", 5, 5), ("EWR", 8, 10)];
const REDUCED_UNTIL: [usize; 3] = [4, 10, 16];

// Travel times from each en-route PCA to the airport.
const TO_EWR: [usize; 3] = [2, 2, 3];
const TO_EXIT: usize = 1;

/// Path ids: `2k` is PCA_k then EXIT, `2k + 1` is PCA_k then EWR, 6 is EWR
/// entered directly through FCA_EWR.
fn via_exit(k: usize) -> usize {
    2 * k
}

fn via_ewr(k: usize) -> usize {
    2 * k + 1
}

const DIRECT_EWR: usize = 6;

pub fn paper_fixture(opts: &FixtureOptions) -> Instance {
    let t_len = ACTIVE + PADDING;
    let mut resources = Vec::new();
    for id in ["FCA0", "FCA1", "FCA2", "FCA_EWR"] {
        resources.push(Resource { id: id.into(), kind: ResourceKind::Fca });
    }
    for id in ["PCA0", "PCA1", "PCA2", "EWR", "EXIT"] {
        resources.push(Resource { id: id.into(), kind: ResourceKind::Pca });
    }

    let arc = |from: &str, to: &str, travel_time: usize| NetworkArc {
        from: from.into(),
        to: to.into(),
        travel_time,
        split_ratio: vec![1.0; t_len],
    };
    let mut arcs = Vec::new();
    for k in 0..3 {
        arcs.push(arc(&format!("FCA{k}"), &format!("PCA{k}"), 0));
    }
    arcs.push(arc("FCA_EWR", "EWR", 0));
    for k in 0..3 {
        arcs.push(arc(&format!("PCA{k}"), "EXIT", TO_EXIT));
        arcs.push(arc(&format!("PCA{k}"), "EWR", TO_EWR[k]));
    }

    let mut paths = Vec::new();
    for k in 0..3 {
        let pca = format!("PCA{k}");
        let fca = format!("FCA{k}");
        paths.push(Path { id: via_exit(k), node_sequence: vec![pca.clone(), "EXIT".into()], entry_fca: fca.clone() });
        paths.push(Path { id: via_ewr(k), node_sequence: vec![pca, "EWR".into()], entry_fca: fca });
    }
    paths.push(Path { id: DIRECT_EWR, node_sequence: vec!["EWR".into()], entry_fca: "FCA_EWR".into() });

    let mut by_resource = BTreeMap::new();
    for (pca, reduced, nominal) in REDUCED {
        let table = (0..t_len)
            .map(|t| REDUCED_UNTIL.iter().map(|&until| if t < until { reduced } else { nominal }).collect())
            .collect();
        by_resource.insert(pca.to_string(), table);
    }
    by_resource.insert("EXIT".to_string(), vec![vec![EXIT_CAPACITY; 3]; t_len]);

    let scenario_tree = ScenarioTree {
        scenarios: (0..3)
            .map(|q| Scenario { name: format!("Scen{}", q + 1), probability: opts.probabilities[q] })
            .collect(),
        stages: vec![
            Stage { start: 0, groups: vec![vec![0, 1, 2]] },
            Stage { start: 4, groups: vec![vec![0], vec![1, 2]] },
            Stage { start: 10, groups: vec![vec![0], vec![1], vec![2]] },
        ],
    };

    let mut inst = Instance {
        name: "zdc-ewr".into(),
        horizon: Horizon { start_time: START, active_periods: ACTIVE, padding_periods: PADDING },
        resources,
        arcs,
        paths,
        scenario_tree,
        capacities: CapacityProfile { by_resource },
        flights: synthetic_flights(opts.flights, opts.seed),
        costs: opts.costs,
    };
    let ratios = derive_split_ratios(&inst.flights, &inst);
    inst.set_split_ratios(ratios);
    inst
}

/// Flights arrive in two tight banks so that the airport and the small PCA2
/// overload during the reduced-capacity periods. About one in ten flights is
/// already airborne (exempt); a third of the en-route flights file a second,
/// costlier option through a neighbouring PCA.
fn synthetic_flights(n: usize, seed: u64) -> Vec<Flight> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flights = Vec::with_capacity(n);
    for i in 0..n {
        let exempt = rng.gen_bool(0.1);
        let bank = pick(&mut rng, &[(3, 0.45), (8, 0.55)]);
        let shift = pick(&mut rng, &[(0, 0.9), (1, 0.1)]);
        // Airport-bound traffic is timed to land in the bank; overflights
        // cross their FCA in it.
        let land = START + (bank + shift) as i64 * PERIOD_SECONDS + rng.gen_range(0..PERIOD_SECONDS);

        let route = rng.gen::<f64>();
        let k = pick(&mut rng, &[(0usize, 0.3), (1, 0.4), (2, 0.3)]);
        let mut tos = Vec::new();
        let t0;
        if route < 0.25 {
            t0 = land;
            tos.push(option(DIRECT_EWR, vec![("FCA_EWR", t0)], 0.0));
        } else {
            let to_ewr = route < 0.8;
            t0 = if to_ewr { land - TO_EWR[k] as i64 * PERIOD_SECONDS } else { land };
            tos.push(en_route_option(k, to_ewr, t0, 0.0));
            if rng.gen_bool(1.0 / 3.0) {
                let j = (k + rng.gen_range(1..3)) % 3;
                let t_alt = (t0 + rng.gen_range(0..=600)).max(START);
                let cost = rng.gen_range(10..=20) as f64;
                tos.push(en_route_option(j, to_ewr, t_alt, cost));
            }
        }

        let etd = if exempt {
            START - rng.gen_range(300..3600)
        } else {
            (t0 - rng.gen_range(1200..=5400)).max(START)
        };
        flights.push(Flight { id: format!("F{:03}", i + 1), etd, exempt, tos });
    }
    flights
}

fn en_route_option(k: usize, to_ewr: bool, t0: i64, cost: f64) -> TrajectoryOption {
    let fca = format!("FCA{k}");
    if to_ewr {
        let at_ewr = t0 + TO_EWR[k] as i64 * PERIOD_SECONDS;
        option(via_ewr(k), vec![(&fca, t0), ("FCA_EWR", at_ewr)], cost)
    } else {
        option(via_exit(k), vec![(&fca, t0)], cost)
    }
}

fn option(path: usize, crossings: Vec<(&str, i64)>, relative_cost: f64) -> TrajectoryOption {
    TrajectoryOption {
        path,
        fca_arrival_times: crossings.into_iter().map(|(fca, time)| FcaCrossing { fca: fca.into(), time }).collect(),
        relative_cost,
    }
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, weighted: &[(T, f64)]) -> T {
    let mut u = rng.gen::<f64>();
    for &(v, w) in weighted {
        if u < w {
            return v;
        }
        u -= w;
    }
    weighted[weighted.len() - 1].0
}

/// FCA1 feeds PCA1 and PCA2. Scheduled traffic goes to PCA1 in period 0 and
/// to PCA2 afterwards; two flights are due at PCA1 in period 0, which can
/// only take one.
pub fn split_pathology_fixture() -> Instance {
    let t_len = 6;
    let mut to_pca1 = vec![0.0; t_len];
    to_pca1[0] = 1.0;
    let to_pca2: Vec<f64> = to_pca1.iter().map(|r| 1.0 - r).collect();
    let flights = (1..=2)
        .map(|i| Flight {
            id: format!("P{i}"),
            etd: 0,
            exempt: false,
            tos: vec![option(0, vec![("FCA1", 60 * i)], 0.0)],
        })
        .collect();
    let mut by_resource = BTreeMap::new();
    by_resource.insert("PCA1".to_string(), vec![vec![1]; t_len]);
    by_resource.insert("PCA2".to_string(), vec![vec![5]; t_len]);
    Instance {
        name: "split-pathology".into(),
        horizon: Horizon { start_time: 0, active_periods: 4, padding_periods: 2 },
        resources: vec![
            Resource { id: "FCA1".into(), kind: ResourceKind::Fca },
            Resource { id: "PCA1".into(), kind: ResourceKind::Pca },
            Resource { id: "PCA2".into(), kind: ResourceKind::Pca },
        ],
        arcs: vec![
            NetworkArc { from: "FCA1".into(), to: "PCA1".into(), travel_time: 0, split_ratio: to_pca1 },
            NetworkArc { from: "FCA1".into(), to: "PCA2".into(), travel_time: 0, split_ratio: to_pca2 },
        ],
        paths: vec![
            Path { id: 0, node_sequence: vec!["PCA1".into()], entry_fca: "FCA1".into() },
            Path { id: 1, node_sequence: vec!["PCA2".into()], entry_fca: "FCA1".into() },
        ],
        scenario_tree: ScenarioTree::single("Scen1"),
        capacities: CapacityProfile { by_resource },
        flights,
        costs: CostParams::default(),
    }
}
