use super::{Flight, Instance, NetworkError};
use std::collections::HashMap;

/// Scheduled demand in flights per period.
///
/// FCA-indexed tables follow the FCA order of the instance; path-indexed
/// tables follow `instance.paths`. Path demand sits at the period the flight
/// reaches the path's first PCA.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandMatrix {
    pub fcas: Vec<String>,
    pub paths: Vec<usize>,
    /// `[fca][t]`
    pub by_fca: Vec<Vec<u32>>,
    /// `[stage][fca][t]`, keyed by the stage of scheduled departure.
    pub by_stage: Vec<Vec<Vec<u32>>>,
    /// `[path][t]`
    pub by_path: Vec<Vec<u32>>,
    /// `[stage][path][t]`
    pub by_stage_path: Vec<Vec<Vec<u32>>>,
}

impl DemandMatrix {
    pub fn zeros(instance: &Instance) -> Self {
        let t = instance.num_periods();
        let fcas: Vec<String> = instance.fcas().into_iter().map(String::from).collect();
        let paths: Vec<usize> = instance.paths.iter().map(|p| p.id).collect();
        let stages = instance.scenario_tree.stages.len().max(1);
        Self {
            by_fca: vec![vec![0; t]; fcas.len()],
            by_stage: vec![vec![vec![0; t]; fcas.len()]; stages],
            by_path: vec![vec![0; t]; paths.len()],
            by_stage_path: vec![vec![vec![0; t]; paths.len()]; stages],
            fcas,
            paths,
        }
    }

    pub fn fca_index(&self, fca: &str) -> Option<usize> {
        self.fcas.iter().position(|f| f == fca)
    }

    pub fn fca(&self, fca: &str) -> Option<&[u32]> {
        self.fca_index(fca).map(|i| self.by_fca[i].as_slice())
    }

    pub fn path(&self, id: usize) -> Option<&[u32]> {
        self.paths.iter().position(|&p| p == id).map(|i| self.by_path[i].as_slice())
    }

    /// Total flights counted at their entry FCA.
    pub fn total(&self) -> u64 {
        self.by_fca.iter().flatten().map(|&x| x as u64).sum()
    }

    /// Stage tables must add up to the direct tables, and path demand must
    /// carry the same number of flights.
    pub fn check_consistency(&self) -> Result<(), String> {
        for (i, row) in self.by_fca.iter().enumerate() {
            for (t, &d) in row.iter().enumerate() {
                let s: u32 = self.by_stage.iter().map(|st| st[i][t]).sum();
                if s != d {
                    return Err(format!("stage demand {s} != direct demand {d} at {} period {t}", self.fcas[i]));
                }
            }
        }
        for (i, row) in self.by_path.iter().enumerate() {
            for (t, &d) in row.iter().enumerate() {
                let s: u32 = self.by_stage_path.iter().map(|st| st[i][t]).sum();
                if s != d {
                    return Err(format!("stage demand {s} != path demand {d} on path {} period {t}", self.paths[i]));
                }
            }
        }
        let path_total: u64 = self.by_path.iter().flatten().map(|&x| x as u64).sum();
        if path_total != self.total() {
            return Err(format!("path demand totals {path_total}, FCA demand totals {}", self.total()));
        }
        Ok(())
    }
}

/// Aggregates each non-exempt flight's most preferred option.
pub fn derive_demand(flights: &[Flight], instance: &Instance) -> Result<DemandMatrix, NetworkError> {
    let mut d = DemandMatrix::zeros(instance);
    let t_len = instance.num_periods();
    let path_pos: HashMap<usize, usize> = d.paths.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    for f in flights.iter().filter(|f| !f.exempt) {
        let opt = f.tos.first().ok_or_else(|| NetworkError::NoOptions { flight: f.id.clone() })?;
        let &pi = path_pos.get(&opt.path).ok_or(NetworkError::UnknownPath(opt.path))?;
        let path = &instance.paths[pi];
        let entry = opt.entry().ok_or_else(|| NetworkError::BadFlight {
            flight: f.id.clone(),
            message: "first option crosses no FCA".into(),
        })?;
        let fi = d.fca_index(&entry.fca).ok_or_else(|| NetworkError::UnknownResource(entry.fca.clone()))?;
        let tf = instance.horizon.period_of(entry.time);
        let outside = |resource: &str, period: i64| NetworkError::OutsideHorizon {
            flight: f.id.clone(),
            resource: resource.to_string(),
            period,
            horizon: t_len,
        };
        if tf < 0 || tf >= t_len as i64 {
            return Err(outside(&entry.fca, tf));
        }
        let lag = instance
            .travel_time(&path.entry_fca, &path.node_sequence[0])
            .ok_or_else(|| NetworkError::UnknownResource(path.node_sequence[0].clone()))?;
        let tp = tf + lag as i64;
        if tp >= t_len as i64 {
            return Err(outside(&path.node_sequence[0], tp));
        }
        let stage = instance.scenario_tree.stage_of(instance.horizon.period_of(f.etd).min(tf));
        let (tf, tp) = (tf as usize, tp as usize);
        d.by_fca[fi][tf] += 1;
        d.by_stage[stage][fi][tf] += 1;
        d.by_path[pi][tp] += 1;
        d.by_stage_path[stage][pi][tp] += 1;
    }
    Ok(d)
}

/// Per-arc split ratios (aligned with `instance.arcs`) from the scheduled
/// hops of non-exempt flights on their preferred option. Periods with no
/// traffic leaving a resource fall back to a uniform split.
pub fn derive_split_ratios(flights: &[Flight], instance: &Instance) -> Vec<Vec<f64>> {
    let t_len = instance.num_periods();
    let arc_index: HashMap<(&str, &str), usize> =
        instance.arcs.iter().enumerate().map(|(i, a)| ((a.from.as_str(), a.to.as_str()), i)).collect();
    let mut counts = vec![vec![0u64; t_len]; instance.arcs.len()];

    for f in flights.iter().filter(|f| !f.exempt) {
        let Some(opt) = f.tos.first() else { continue };
        let (Some(path), Some(entry)) = (instance.path(opt.path), opt.entry()) else { continue };
        let Ok(offsets) = instance.path_offsets(path) else { continue };
        let tf = instance.horizon.period_of(entry.time);
        let mut hops = vec![(path.entry_fca.as_str(), path.node_sequence[0].as_str(), tf)];
        for (k, w) in path.node_sequence.windows(2).enumerate() {
            hops.push((w[0].as_str(), w[1].as_str(), tf + offsets[k] as i64));
        }
        for (from, to, t) in hops {
            if let (Some(&a), true) = (arc_index.get(&(from, to)), (0..t_len as i64).contains(&t)) {
                counts[a][t as usize] += 1;
            }
        }
    }

    let mut by_source: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, a) in instance.arcs.iter().enumerate() {
        by_source.entry(a.from.as_str()).or_default().push(i);
    }
    let mut ratios = vec![vec![0.0; t_len]; instance.arcs.len()];
    for arcs in by_source.values() {
        for t in 0..t_len {
            let total: u64 = arcs.iter().map(|&a| counts[a][t]).sum();
            for &a in arcs {
                ratios[a][t] =
                    if total == 0 { 1.0 / arcs.len() as f64 } else { counts[a][t] as f64 / total as f64 };
            }
        }
    }
    ratios
}
