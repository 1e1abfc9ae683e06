//! Small instances shared by unit tests.

use crate::network::{
    CapacityProfile, CostParams, FcaCrossing, Flight, Horizon, Instance, NetworkArc, Path, Resource, ResourceKind,
    ScenarioTree, TrajectoryOption,
};
use std::collections::BTreeMap;

/// One FCA `F` feeding one PCA `K` of capacity `cap`; one flight per entry
/// of `periods`, crossing `F` at the start of that period. The last of the
/// `t_len` periods is padding.
pub fn single_lane(periods: &[usize], cap: u32, t_len: usize) -> Instance {
    let flights = periods
        .iter()
        .enumerate()
        .map(|(i, &t)| Flight {
            id: format!("f{i}"),
            etd: 0,
            exempt: false,
            tos: vec![TrajectoryOption {
                path: 0,
                fca_arrival_times: vec![FcaCrossing { fca: "F".into(), time: 900 * t as i64 }],
                relative_cost: 0.0,
            }],
        })
        .collect();
    let mut by_resource = BTreeMap::new();
    by_resource.insert("K".to_string(), vec![vec![cap]; t_len]);
    Instance {
        name: "lane".into(),
        horizon: Horizon { start_time: 0, active_periods: t_len - 1, padding_periods: 1 },
        resources: vec![
            Resource { id: "F".into(), kind: ResourceKind::Fca },
            Resource { id: "K".into(), kind: ResourceKind::Pca },
        ],
        arcs: vec![NetworkArc { from: "F".into(), to: "K".into(), travel_time: 0, split_ratio: vec![1.0; t_len] }],
        paths: vec![Path { id: 0, node_sequence: vec!["K".into()], entry_fca: "F".into() }],
        scenario_tree: ScenarioTree::single("S"),
        capacities: CapacityProfile { by_resource },
        flights,
        costs: CostParams::default(),
    }
}
