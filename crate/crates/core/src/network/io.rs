//! Instance documents (JSON) and the scenario-by-resource capacity CSV.

use super::{CapacityProfile, Instance, NetworkError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const INSTANCE_SCHEMA: &str = "ctop-instance/1";
const CAPACITY_HEADER: &str = "# ctop-capacity v1";

#[derive(Serialize, Deserialize)]
struct Document {
    schema: String,
    instance: Instance,
}

#[derive(Serialize)]
struct DocumentRef<'a> {
    schema: &'a str,
    instance: &'a Instance,
}

pub fn instance_to_json(instance: &Instance) -> String {
    let doc = DocumentRef { schema: INSTANCE_SCHEMA, instance };
    let mut s = serde_json::to_string_pretty(&doc).expect("instance serializes");
    s.push('\n');
    s
}

pub fn instance_from_json(text: &str) -> Result<Instance, NetworkError> {
    let doc: Document = serde_json::from_str(text).map_err(|e| NetworkError::Format(e.to_string()))?;
    if doc.schema != INSTANCE_SCHEMA {
        return Err(NetworkError::Format(format!("unsupported schema `{}`, expected `{INSTANCE_SCHEMA}`", doc.schema)));
    }
    Ok(doc.instance)
}

pub fn write_instance(path: &Path, instance: &Instance) -> Result<(), NetworkError> {
    std::fs::write(path, instance_to_json(instance))?;
    Ok(())
}

pub fn read_instance(path: &Path) -> Result<Instance, NetworkError> {
    instance_from_json(&std::fs::read_to_string(path)?)
}

/// Rows are scenario x resource, columns are period start labels.
pub fn write_capacity_csv(instance: &Instance) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["Scenario".to_string(), "Resource".to_string()];
    header.extend((0..instance.num_periods()).map(|t| instance.horizon.label(t)));
    w.write_record(&header).expect("in-memory write");
    for (q, scen) in instance.scenario_tree.scenarios.iter().enumerate() {
        for pca in instance.pcas() {
            let Some(table) = instance.capacities.by_resource.get(pca) else { continue };
            let mut row = vec![scen.name.clone(), pca.to_string()];
            row.extend(table.iter().map(|per| per.get(q).map_or(String::new(), |c| c.to_string())));
            w.write_record(&row).expect("in-memory write");
        }
    }
    let body = String::from_utf8(w.into_inner().expect("flush")).expect("utf8");
    format!("{CAPACITY_HEADER}\n{body}")
}

/// Parses [`write_capacity_csv`] output. Returns scenario names in order of
/// first appearance and the profile indexed by that order.
pub fn read_capacity_csv(text: &str) -> Result<(Vec<String>, CapacityProfile), NetworkError> {
    let err = |line: usize, message: String| NetworkError::CapacityCsv { line, message };
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    if first.trim_end() != CAPACITY_HEADER {
        return Err(err(1, format!("expected version line `{CAPACITY_HEADER}`")));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(rest.as_bytes());
    let periods = rdr.headers().map_err(|e| err(2, e.to_string()))?.len().saturating_sub(2);
    let mut scenarios: Vec<String> = Vec::new();
    let mut cells: BTreeMap<String, Vec<Vec<Option<u32>>>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 3;
        let rec = rec.map_err(|e| err(line, e.to_string()))?;
        if rec.len() != periods + 2 {
            return Err(err(line, format!("{} fields, expected {}", rec.len(), periods + 2)));
        }
        let q = match scenarios.iter().position(|s| s == &rec[0]) {
            Some(q) => q,
            None => {
                scenarios.push(rec[0].to_string());
                scenarios.len() - 1
            }
        };
        let table = cells.entry(rec[1].to_string()).or_insert_with(|| vec![Vec::new(); periods]);
        for (t, field) in rec.iter().skip(2).enumerate() {
            let v: u32 = field.trim().parse().map_err(|_| err(line, format!("bad capacity `{field}`")))?;
            let row = &mut table[t];
            if row.len() <= q {
                row.resize(q + 1, None);
            }
            row[q] = Some(v);
        }
    }
    let mut by_resource = BTreeMap::new();
    for (res, table) in cells {
        let mut full = Vec::with_capacity(periods);
        for (t, row) in table.into_iter().enumerate() {
            if row.len() != scenarios.len() || row.iter().any(Option::is_none) {
                return Err(err(0, format!("{res} period {t} is missing a scenario value")));
            }
            full.push(row.into_iter().flatten().collect());
        }
        by_resource.insert(res, full);
    }
    Ok((scenarios, CapacityProfile { by_resource }))
}
