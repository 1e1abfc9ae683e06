use crate::network::CostParams;
use thiserror::Error;

const COST_HEADER: &str = "# ctop-costs v1";

/// Ground and air holding periods per scenario with their prices.
#[derive(Debug, Clone, PartialEq)]
pub struct CostBreakdown {
    pub scenarios: Vec<String>,
    pub probabilities: Vec<f64>,
    pub ground: Vec<f64>,
    pub air: Vec<f64>,
    pub total: Vec<f64>,
    pub expected: f64,
}

impl CostBreakdown {
    pub fn new(
        scenarios: Vec<String>,
        probabilities: Vec<f64>,
        ground: Vec<f64>,
        air: Vec<f64>,
        costs: CostParams,
    ) -> Self {
        let total: Vec<f64> = ground.iter().zip(&air).map(|(g, a)| costs.ground * g + costs.air * a).collect();
        let expected = probabilities.iter().zip(&total).map(|(p, t)| p * t).sum();
        Self { scenarios, probabilities, ground, air, total, expected }
    }
}

/// One line of a cost table: a model's breakdown and its solve time.
#[derive(Debug, Clone, PartialEq)]
pub struct CostRow {
    pub label: String,
    pub scenarios: Vec<String>,
    pub ground: Vec<f64>,
    pub air: Vec<f64>,
    pub total: Vec<f64>,
    pub expected: f64,
    pub seconds: f64,
}

impl CostRow {
    pub fn new(label: impl Into<String>, b: &CostBreakdown, seconds: f64) -> Self {
        Self {
            label: label.into(),
            scenarios: b.scenarios.clone(),
            ground: b.ground.clone(),
            air: b.air.clone(),
            total: b.total.clone(),
            expected: b.expected,
            seconds,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CostCsvError {
    #[error("cost csv: expected version line `{COST_HEADER}`")]
    Version,
    #[error("cost csv line {line}: {message}")]
    Line { line: usize, message: String },
}

/// Columns: model, ground per scenario, air per scenario, total per
/// scenario, expected cost, seconds. All rows must share one scenario list.
pub fn write_cost_csv(rows: &[CostRow]) -> String {
    let scenarios = rows.first().map(|r| r.scenarios.clone()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["Model".to_string()];
    for part in ["Ground", "Air", "Total"] {
        header.extend(scenarios.iter().map(|s| format!("{part} {s}")));
    }
    header.push("Expected".into());
    header.push("Seconds".into());
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        let mut rec = vec![r.label.clone()];
        for part in [&r.ground, &r.air, &r.total] {
            rec.extend(part.iter().map(f64::to_string));
        }
        rec.push(r.expected.to_string());
        rec.push(r.seconds.to_string());
        w.write_record(&rec).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("flush")).expect("utf8");
    format!("{COST_HEADER}\n{body}")
}

pub fn read_cost_csv(text: &str) -> Result<Vec<CostRow>, CostCsvError> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    if first.trim_end() != COST_HEADER {
        return Err(CostCsvError::Version);
    }
    let mut rdr = csv::ReaderBuilder::new().from_reader(rest.as_bytes());
    let header = rdr.headers().map_err(|e| CostCsvError::Line { line: 2, message: e.to_string() })?.clone();
    let n = header.len().saturating_sub(3) / 3;
    if header.len() != 3 * n + 3 {
        return Err(CostCsvError::Line { line: 2, message: format!("{} columns", header.len()) });
    }
    let scenarios: Vec<String> =
        (0..n).map(|i| header[1 + i].strip_prefix("Ground ").unwrap_or(&header[1 + i]).to_string()).collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 3;
        let rec = rec.map_err(|e| CostCsvError::Line { line, message: e.to_string() })?;
        let nums = rec
            .iter()
            .skip(1)
            .map(str::parse::<f64>)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CostCsvError::Line { line, message: e.to_string() })?;
        if nums.len() != 3 * n + 2 {
            return Err(CostCsvError::Line { line, message: format!("{} fields", rec.len()) });
        }
        rows.push(CostRow {
            label: rec[0].to_string(),
            scenarios: scenarios.clone(),
            ground: nums[..n].to_vec(),
            air: nums[n..2 * n].to_vec(),
            total: nums[2 * n..3 * n].to_vec(),
            expected: nums[3 * n],
            seconds: nums[3 * n + 1],
        });
    }
    Ok(rows)
}
