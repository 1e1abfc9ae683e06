//! Planned acceptance rates per FCA and period.

use crate::network::Horizon;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const RATES_HEADER: &str = "# ctop-rates v1";

#[derive(Debug, Error, PartialEq)]
pub enum RateCsvError {
    #[error("rates csv: expected version line `{RATES_HEADER}`")]
    Version,
    #[error("rates csv line {line}: {message}")]
    Line { line: usize, message: String },
}

/// `rates[i][t]` is the number of flights resource `resources[i]` accepts
/// in period `t`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RatePlan {
    pub resources: Vec<String>,
    pub rates: Vec<Vec<u32>>,
}

impl RatePlan {
    pub fn zeros(resources: Vec<String>, periods: usize) -> Self {
        let rates = vec![vec![0; periods]; resources.len()];
        Self { resources, rates }
    }

    pub fn periods(&self) -> usize {
        self.rates.first().map_or(0, Vec::len)
    }

    pub fn index_of(&self, resource: &str) -> Option<usize> {
        self.resources.iter().position(|r| r == resource)
    }

    pub fn row(&self, resource: &str) -> Option<&[u32]> {
        self.index_of(resource).map(|i| self.rates[i].as_slice())
    }

    /// Rate of `resource` in `period`; 0 for unknown resources or periods.
    pub fn get(&self, resource: &str, period: usize) -> u32 {
        self.row(resource).and_then(|r| r.get(period)).copied().unwrap_or(0)
    }

    pub fn set(&mut self, resource: &str, period: usize, value: u32) {
        if let Some(i) = self.index_of(resource) {
            self.rates[i][period] = value;
        }
    }

    pub fn to_csv(&self, horizon: &Horizon) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["Resource".to_string()];
        header.extend((0..self.periods()).map(|t| horizon.label(t)));
        w.write_record(&header).expect("in-memory write");
        for (res, row) in self.resources.iter().zip(&self.rates) {
            let mut rec = vec![res.clone()];
            rec.extend(row.iter().map(u32::to_string));
            w.write_record(&rec).expect("in-memory write");
        }
        let body = String::from_utf8(w.into_inner().expect("flush")).expect("utf8");
        format!("{RATES_HEADER}\n{body}")
    }

    pub fn from_csv(text: &str) -> Result<Self, RateCsvError> {
        let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
        if first.trim_end() != RATES_HEADER {
            return Err(RateCsvError::Version);
        }
        let mut rdr = csv::ReaderBuilder::new().from_reader(rest.as_bytes());
        let periods = rdr
            .headers()
            .map_err(|e| RateCsvError::Line { line: 2, message: e.to_string() })?
            .len()
            .saturating_sub(1);
        let mut plan = RatePlan { resources: Vec::new(), rates: Vec::new() };
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 3;
            let rec = rec.map_err(|e| RateCsvError::Line { line, message: e.to_string() })?;
            if rec.len() != periods + 1 {
                return Err(RateCsvError::Line { line, message: format!("{} fields, expected {}", rec.len(), periods + 1) });
            }
            let row = rec
                .iter()
                .skip(1)
                .map(|f| f.trim().parse::<u32>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| RateCsvError::Line { line, message: e.to_string() })?;
            plan.resources.push(rec[0].to_string());
            plan.rates.push(row);
        }
        Ok(plan)
    }
}
