use crate::network::{Horizon, PERIOD_SECONDS};
use crate::rates::RatePlan;
use serde::{Deserialize, Serialize};

const SLOTS_HEADER: &str = "# ctop-slots v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlotState {
    Free,
    /// The flight's controlling slot.
    Assigned(String),
    /// Used by a flight controlled at an upstream FCA.
    Marked(String),
}

impl SlotState {
    pub fn owner(&self) -> Option<&str> {
        match self {
            SlotState::Free => None,
            SlotState::Assigned(f) | SlotState::Marked(f) => Some(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slot {
    /// Seconds into the period.
    pub offset: i64,
    pub state: SlotState,
}

/// Position of a slot in a [`SlotTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotRef {
    pub fca: usize,
    pub period: usize,
    pub index: usize,
}

/// Evenly spaced slots per FCA and period, `slots[fca][t][i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotTable {
    pub start_time: i64,
    pub fcas: Vec<String>,
    pub slots: Vec<Vec<Vec<Slot>>>,
}

/// Offsets `round((i - 1) * 900 / rate)`, halves rounded up.
pub fn slot_offsets(rate: u32) -> Vec<i64> {
    let p = rate as i64;
    (0..p).map(|i| (2 * i * PERIOD_SECONDS + p) / (2 * p)).collect()
}

pub fn create_slots(rates: &RatePlan, horizon: &Horizon) -> SlotTable {
    let slots = rates
        .rates
        .iter()
        .map(|row| {
            row.iter()
                .map(|&p| slot_offsets(p).into_iter().map(|offset| Slot { offset, state: SlotState::Free }).collect())
                .collect()
        })
        .collect();
    SlotTable { start_time: horizon.start_time, fcas: rates.resources.clone(), slots }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SlotRow {
    fca: String,
    period: usize,
    offset: i64,
    time: i64,
    state: String,
    flight: String,
}

impl SlotTable {
    pub fn fca_index(&self, fca: &str) -> Option<usize> {
        self.fcas.iter().position(|f| f == fca)
    }

    pub fn time_of(&self, r: SlotRef) -> i64 {
        self.start_time + r.period as i64 * PERIOD_SECONDS + self.slots[r.fca][r.period][r.index].offset
    }

    pub fn get(&self, r: SlotRef) -> &Slot {
        &self.slots[r.fca][r.period][r.index]
    }

    pub fn set_state(&mut self, r: SlotRef, state: SlotState) {
        self.slots[r.fca][r.period][r.index].state = state;
    }

    /// Earliest free slot of `fca` at or after `time`.
    pub fn first_free(&self, fca: usize, time: i64) -> Option<SlotRef> {
        let first = (time - self.start_time).div_euclid(PERIOD_SECONDS).max(0) as usize;
        let per_t = &self.slots[fca];
        (first..per_t.len()).find_map(|period| {
            per_t[period].iter().enumerate().find_map(|(index, s)| {
                let r = SlotRef { fca, period, index };
                (s.state == SlotState::Free && self.time_of(r) >= time).then_some(r)
            })
        })
    }

    /// `(assigned, marked, free)` slots of `fca` in `period`.
    pub fn counts(&self, fca: usize, period: usize) -> (usize, usize, usize) {
        self.slots[fca][period].iter().fold((0, 0, 0), |(a, m, f), s| match s.state {
            SlotState::Assigned(_) => (a + 1, m, f),
            SlotState::Marked(_) => (a, m + 1, f),
            SlotState::Free => (a, m, f + 1),
        })
    }

    /// One CSV row per slot, for auditing.
    pub fn dump_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for (fi, fca) in self.fcas.iter().enumerate() {
            for (period, row) in self.slots[fi].iter().enumerate() {
                for (index, s) in row.iter().enumerate() {
                    let (state, flight) = match &s.state {
                        SlotState::Free => ("free", ""),
                        SlotState::Assigned(f) => ("assigned", f.as_str()),
                        SlotState::Marked(f) => ("marked", f.as_str()),
                    };
                    let time = self.time_of(SlotRef { fca: fi, period, index });
                    w.serialize(SlotRow {
                        fca: fca.clone(),
                        period,
                        offset: s.offset,
                        time,
                        state: state.into(),
                        flight: flight.into(),
                    })
                    .expect("in-memory write");
                }
            }
        }
        let body = String::from_utf8(w.into_inner().expect("flush")).expect("utf8");
        format!("{SLOTS_HEADER}\n{body}")
    }
}
