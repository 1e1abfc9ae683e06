//! Instances: resources, the FCA/PCA network, paths, scenario tree,
//! capacities, flights, and demand aggregation.

mod demand;
mod fixture;
mod io;
mod validate;

pub use demand::{derive_demand, derive_split_ratios, DemandMatrix};
pub use fixture::{paper_fixture, split_pathology_fixture, FixtureOptions};
pub use io::{
    instance_from_json, instance_to_json, read_capacity_csv, read_instance, write_capacity_csv, write_instance,
    INSTANCE_SCHEMA,
};
pub use validate::{validate_instance, ValidationReport, Violation};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Length of one planning period in seconds.
pub const PERIOD_SECONDS: i64 = 900;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("unknown resource `{0}`")]
    UnknownResource(String),
    #[error("unknown path {0}")]
    UnknownPath(usize),
    #[error("flight `{flight}` has no trajectory options")]
    NoOptions { flight: String },
    #[error("flight `{flight}` reaches {resource} at period {period}, outside the horizon of {horizon} periods")]
    OutsideHorizon { flight: String, resource: String, period: i64, horizon: usize },
    #[error("flight `{flight}`: {message}")]
    BadFlight { flight: String, message: String },
    #[error("instance document: {0}")]
    Format(String),
    #[error("capacity csv line {line}: {message}")]
    CapacityCsv { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ResourceKind {
    #[serde(rename = "FCA")]
    Fca,
    #[serde(rename = "PCA")]
    Pca,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resource {
    pub id: String,
    pub kind: ResourceKind,
}

/// Directed arc of the resource network. `split_ratio[t]` is the share of
/// the traffic leaving `from` in period `t` that heads to `to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkArc {
    pub from: String,
    pub to: String,
    pub travel_time: usize,
    pub split_ratio: Vec<f64>,
}

/// A sequence of PCAs flown in order, ground-controlled at `entry_fca`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub id: usize,
    pub node_sequence: Vec<String>,
    pub entry_fca: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub probability: f64,
}

/// A stage starts at `start` (0-based period). `groups` partitions the
/// scenarios into branches that are still indistinguishable during the stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub start: usize,
    pub groups: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTree {
    pub scenarios: Vec<Scenario>,
    pub stages: Vec<Stage>,
}

impl ScenarioTree {
    /// One scenario with probability 1 and a single stage.
    pub fn single(name: impl Into<String>) -> Self {
        Self {
            scenarios: vec![Scenario { name: name.into(), probability: 1.0 }],
            stages: vec![Stage { start: 0, groups: vec![vec![0]] }],
        }
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.scenarios.iter().map(|s| s.probability).collect()
    }

    /// Index of the stage in force at `period` (the last stage starting at or
    /// before it; periods before the first stage map to stage 0).
    pub fn stage_of(&self, period: i64) -> usize {
        self.stages.iter().rposition(|s| s.start as i64 <= period).unwrap_or(0)
    }

    /// First period after stage `s` (`horizon` for the last stage).
    pub fn stage_end(&self, s: usize, horizon: usize) -> usize {
        self.stages.get(s + 1).map_or(horizon, |n| n.start)
    }
}

/// Per PCA, per period, per scenario capacity in flights per period.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CapacityProfile {
    pub by_resource: BTreeMap<String, Vec<Vec<u32>>>,
}

impl CapacityProfile {
    pub fn get(&self, resource: &str, period: usize, scenario: usize) -> Option<u32> {
        self.by_resource.get(resource)?.get(period)?.get(scenario).copied()
    }

    /// Largest capacity over scenarios at `period`.
    pub fn nominal(&self, resource: &str, period: usize) -> Option<u32> {
        self.by_resource.get(resource)?.get(period)?.iter().copied().max()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcaCrossing {
    pub fca: String,
    /// Unimpeded crossing time, absolute seconds.
    pub time: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOption {
    pub path: usize,
    pub fca_arrival_times: Vec<FcaCrossing>,
    /// Penalty versus the most preferred option, in minutes.
    pub relative_cost: f64,
}

impl TrajectoryOption {
    /// Crossing of the first FCA on the route.
    pub fn entry(&self) -> Option<&FcaCrossing> {
        self.fca_arrival_times.first()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flight {
    pub id: String,
    /// Scheduled departure, absolute seconds.
    pub etd: i64,
    pub exempt: bool,
    pub tos: Vec<TrajectoryOption>,
}

impl Flight {
    /// Earliest unimpeded FCA crossing over all options.
    pub fn initial_arrival_time(&self) -> Option<i64> {
        self.tos.iter().flat_map(|o| o.fca_arrival_times.iter().map(|c| c.time)).min()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Cost of one flight held on the ground for one period.
    pub ground: f64,
    /// Cost of one flight held in the air for one period.
    pub air: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self { ground: 1.0, air: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    /// Absolute start of period 0, seconds.
    pub start_time: i64,
    pub active_periods: usize,
    pub padding_periods: usize,
}

impl Horizon {
    /// Total number of periods including padding.
    pub fn len(&self) -> usize {
        self.active_periods + self.padding_periods
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Period containing `time`; negative before the start, possibly beyond
    /// the horizon after it.
    pub fn period_of(&self, time: i64) -> i64 {
        (time - self.start_time).div_euclid(PERIOD_SECONDS)
    }

    pub fn period_start(&self, period: usize) -> i64 {
        self.start_time + PERIOD_SECONDS * period as i64
    }

    /// Clock label `HH:MM` of a period start.
    pub fn label(&self, period: usize) -> String {
        let secs = self.period_start(period).rem_euclid(86_400);
        format!("{:02}:{:02}", secs / 3600, (secs % 3600) / 60)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub name: String,
    pub horizon: Horizon,
    pub resources: Vec<Resource>,
    pub arcs: Vec<NetworkArc>,
    pub paths: Vec<Path>,
    pub scenario_tree: ScenarioTree,
    pub capacities: CapacityProfile,
    pub flights: Vec<Flight>,
    pub costs: CostParams,
}

impl Instance {
    pub fn num_periods(&self) -> usize {
        self.horizon.len()
    }

    pub fn num_scenarios(&self) -> usize {
        self.scenario_tree.len()
    }

    pub fn resource(&self, id: &str) -> Option<&Resource> {
        self.resources.iter().find(|r| r.id == id)
    }

    pub fn kind_of(&self, id: &str) -> Option<ResourceKind> {
        self.resource(id).map(|r| r.kind)
    }

    pub fn fcas(&self) -> Vec<&str> {
        self.ids_of(ResourceKind::Fca)
    }

    pub fn pcas(&self) -> Vec<&str> {
        self.ids_of(ResourceKind::Pca)
    }

    fn ids_of(&self, kind: ResourceKind) -> Vec<&str> {
        self.resources.iter().filter(|r| r.kind == kind).map(|r| r.id.as_str()).collect()
    }

    pub fn path(&self, id: usize) -> Option<&Path> {
        self.paths.iter().find(|p| p.id == id)
    }

    pub fn path_index(&self, id: usize) -> Option<usize> {
        self.paths.iter().position(|p| p.id == id)
    }

    pub fn arc(&self, from: &str, to: &str) -> Option<&NetworkArc> {
        self.arcs.iter().find(|a| a.from == from && a.to == to)
    }

    pub fn travel_time(&self, from: &str, to: &str) -> Option<usize> {
        self.arc(from, to).map(|a| a.travel_time)
    }

    pub fn capacity(&self, pca: &str, period: usize, scenario: usize) -> u32 {
        self.capacities.get(pca, period, scenario).unwrap_or(0)
    }

    /// Periods from the entry FCA crossing to each node of the path.
    pub fn path_offsets(&self, path: &Path) -> Result<Vec<usize>, NetworkError> {
        let mut offsets = Vec::with_capacity(path.node_sequence.len());
        let first = path.node_sequence.first().ok_or(NetworkError::UnknownPath(path.id))?;
        let mut acc = self
            .travel_time(&path.entry_fca, first)
            .ok_or_else(|| NetworkError::UnknownResource(format!("{}->{}", path.entry_fca, first)))?;
        offsets.push(acc);
        for w in path.node_sequence.windows(2) {
            acc += self
                .travel_time(&w[0], &w[1])
                .ok_or_else(|| NetworkError::UnknownResource(format!("{}->{}", w[0], w[1])))?;
            offsets.push(acc);
        }
        Ok(offsets)
    }

    /// Replaces every arc's split-ratio vector (same order as `arcs`).
    pub fn set_split_ratios(&mut self, ratios: Vec<Vec<f64>>) {
        for (arc, r) in self.arcs.iter_mut().zip(ratios) {
            arc.split_ratio = r;
        }
    }

}
