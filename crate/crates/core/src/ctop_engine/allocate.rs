use super::slots::{SlotRef, SlotState, SlotTable};
use super::EngineError;
use crate::network::{Flight, Instance, TrajectoryOption};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

const ALLOCATION_HEADER: &str = "# ctop-allocation v1";

/// Active window `[from, to)` in seconds per controlled FCA.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub windows: BTreeMap<String, (i64, i64)>,
}

impl Program {
    /// Every FCA of the instance, active over the non-padding periods.
    pub fn for_instance(instance: &Instance) -> Self {
        let h = &instance.horizon;
        let window = (h.start_time, h.period_start(h.active_periods));
        Self { windows: instance.fcas().into_iter().map(|f| (f.to_string(), window)).collect() }
    }

    pub fn is_active(&self, fca: &str, time: i64) -> bool {
        self.windows.get(fca).is_some_and(|&(from, to)| from <= time && time < to)
    }

    /// Index of the first crossing of `option` that falls in an active window.
    pub fn controlling_crossing(&self, option: &TrajectoryOption) -> Option<usize> {
        option.fca_arrival_times.iter().position(|c| self.is_active(&c.fca, c.time))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inclusion {
    Included,
    Exempt,
    Excluded,
}

pub fn determine_inclusion(flight: &Flight, program: &Program) -> Inclusion {
    let included = flight.tos.iter().any(|o| program.controlling_crossing(o).is_some());
    match (included, flight.exempt) {
        (false, _) => Inclusion::Excluded,
        (true, true) => Inclusion::Exempt,
        (true, false) => Inclusion::Included,
    }
}

/// Option `option` of a flight priced against the current slot table.
#[derive(Debug, Clone, PartialEq)]
pub struct Quote {
    pub option: usize,
    /// `None` when the option avoids every active FCA window.
    pub slot: Option<SlotRef>,
    pub ground_delay_s: i64,
    /// Ground delay in minutes plus relative cost.
    pub adjusted_cost: f64,
}

/// Prices one option; `None` when it is controlled but no slot is left.
pub fn quote_option(program: &Program, slots: &SlotTable, flight: &Flight, option: usize) -> Option<Quote> {
    let o = &flight.tos[option];
    let Some(ci) = program.controlling_crossing(o) else {
        return Some(Quote { option, slot: None, ground_delay_s: 0, adjusted_cost: o.relative_cost });
    };
    let c = &o.fca_arrival_times[ci];
    let slot = slots.first_free(slots.fca_index(&c.fca)?, c.time)?;
    let delay = slots.time_of(slot) - c.time;
    Some(Quote { option, slot: Some(slot), ground_delay_s: delay, adjusted_cost: delay as f64 / 60.0 + o.relative_cost })
}

/// Lowest adjusted cost over the flight's options; ties go to the earlier
/// option.
pub fn best_quote(program: &Program, slots: &SlotTable, flight: &Flight) -> Option<Quote> {
    (0..flight.tos.len())
        .filter_map(|i| quote_option(program, slots, flight, i))
        .fold(None, |best: Option<Quote>, q| match best {
            Some(b) if b.adjusted_cost <= q.adjusted_cost => Some(b),
            _ => Some(q),
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub flight: String,
    pub inclusion: Inclusion,
    pub option: usize,
    pub slot: Option<SlotRef>,
    /// Controlling FCA, when slotted.
    pub fca: Option<String>,
    pub slot_time: Option<i64>,
    /// Downstream slots marked as used, with their times.
    pub marked: Vec<(SlotRef, i64)>,
    pub ground_delay_s: i64,
    pub relative_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    /// Exempt flights first, then included flights, each in IAT order.
    /// Excluded flights follow in id order with no slot.
    pub assignments: Vec<Assignment>,
    pub slots: SlotTable,
}

impl AllocationResult {
    /// Ground delay of non-exempt flights, in seconds.
    pub fn total_ground_delay_s(&self) -> i64 {
        self.assignments.iter().filter(|a| a.inclusion == Inclusion::Included).map(|a| a.ground_delay_s).sum()
    }

    /// Relative trajectory cost of the chosen options, in minutes.
    pub fn total_relative_cost(&self) -> f64 {
        self.assignments.iter().filter(|a| a.inclusion == Inclusion::Included).map(|a| a.relative_cost).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for a in &self.assignments {
            w.serialize(AllocationRow::from(a)).expect("in-memory write");
        }
        let body = String::from_utf8(w.into_inner().expect("flush")).expect("utf8");
        format!("{ALLOCATION_HEADER}\n{body}")
    }
}

/// One line of the allocation CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRow {
    pub flight: String,
    pub status: String,
    pub option: usize,
    pub fca: String,
    pub slot_time: Option<i64>,
    pub ground_delay_min: f64,
    pub reroute_cost: f64,
}

impl From<&Assignment> for AllocationRow {
    fn from(a: &Assignment) -> Self {
        Self {
            flight: a.flight.clone(),
            status: match a.inclusion {
                Inclusion::Included => "included",
                Inclusion::Exempt => "exempt",
                Inclusion::Excluded => "excluded",
            }
            .into(),
            option: a.option,
            fca: a.fca.clone().unwrap_or_default(),
            slot_time: a.slot_time,
            ground_delay_min: a.ground_delay_s as f64 / 60.0,
            reroute_cost: a.relative_cost,
        }
    }
}

pub fn read_allocation_csv(text: &str) -> Result<Vec<AllocationRow>, EngineError> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    if first.trim_end() != ALLOCATION_HEADER {
        return Err(EngineError::Csv(format!("expected version line `{ALLOCATION_HEADER}`")));
    }
    csv::Reader::from_reader(rest.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| EngineError::Csv(e.to_string()))
}

fn iat_order<'a>(flights: impl Iterator<Item = &'a Flight>) -> Vec<&'a Flight> {
    let mut v: Vec<&Flight> = flights.collect();
    v.sort_by(|a, b| {
        let ka = (a.initial_arrival_time().unwrap_or(i64::MAX), &a.id);
        let kb = (b.initial_arrival_time().unwrap_or(i64::MAX), &b.id);
        ka.cmp(&kb)
    });
    v
}

/// Marks, for each crossing after the controlling one, the first free slot
/// at or after the delayed crossing time.
fn mark_downstream(
    program: &Program,
    slots: &mut SlotTable,
    flight: &Flight,
    option: usize,
    delay: i64,
) -> Vec<(SlotRef, i64)> {
    let o = &flight.tos[option];
    let Some(ci) = program.controlling_crossing(o) else { return Vec::new() };
    let mut marked = Vec::new();
    for c in &o.fca_arrival_times[ci + 1..] {
        let Some(fi) = slots.fca_index(&c.fca) else { continue };
        if !program.windows.contains_key(&c.fca) {
            continue;
        }
        if let Some(r) = slots.first_free(fi, c.time + delay) {
            slots.set_state(r, SlotState::Marked(flight.id.clone()));
            marked.push((r, slots.time_of(r)));
        }
    }
    marked
}

/// Greedy trajectory-option and slot assignment. Exempt flights keep their
/// first option and take the first free slot at or after their crossing; if
/// none is left they fly unslotted. Every other included flight, in IAT
/// order, takes the option with the lowest ground-delay-minutes plus
/// relative cost. Slots downstream of the controlling FCA are then marked.
pub fn allocate_tos(program: &Program, flights: &[Flight], mut slots: SlotTable) -> Result<AllocationResult, EngineError> {
    let mut by_class: BTreeMap<u8, Vec<&Flight>> = BTreeMap::new();
    for f in flights {
        let class = match determine_inclusion(f, program) {
            Inclusion::Exempt => 0,
            Inclusion::Included => 1,
            Inclusion::Excluded => 2,
        };
        by_class.entry(class).or_default().push(f);
    }
    let mut assignments = Vec::with_capacity(flights.len());

    for f in iat_order(by_class.remove(&0).unwrap_or_default().into_iter()) {
        let q = quote_option(program, &slots, f, 0);
        let (slot, delay) = match q {
            Some(Quote { slot: Some(r), ground_delay_s, .. }) => {
                slots.set_state(r, SlotState::Assigned(f.id.clone()));
                (Some(r), ground_delay_s)
            }
            _ => (None, 0),
        };
        let marked = if slot.is_some() { mark_downstream(program, &mut slots, f, 0, delay) } else { Vec::new() };
        assignments.push(Assignment {
            flight: f.id.clone(),
            inclusion: Inclusion::Exempt,
            option: 0,
            slot,
            fca: slot.map(|r| slots.fcas[r.fca].clone()),
            slot_time: slot.map(|r| slots.time_of(r)),
            marked,
            ground_delay_s: delay,
            relative_cost: f.tos[0].relative_cost,
        });
    }

    for f in iat_order(by_class.remove(&1).unwrap_or_default().into_iter()) {
        let q = best_quote(program, &slots, f).ok_or_else(|| EngineError::Overflow { flight: f.id.clone() })?;
        if let Some(r) = q.slot {
            slots.set_state(r, SlotState::Assigned(f.id.clone()));
        }
        let marked = mark_downstream(program, &mut slots, f, q.option, q.ground_delay_s);
        assignments.push(Assignment {
            flight: f.id.clone(),
            inclusion: Inclusion::Included,
            option: q.option,
            slot: q.slot,
            fca: q.slot.map(|r| slots.fcas[r.fca].clone()),
            slot_time: q.slot.map(|r| slots.time_of(r)),
            marked,
            ground_delay_s: q.ground_delay_s,
            relative_cost: f.tos[q.option].relative_cost,
        });
    }

    let mut excluded = by_class.remove(&2).unwrap_or_default();
    excluded.sort_by(|a, b| a.id.cmp(&b.id));
    for f in excluded {
        assignments.push(Assignment {
            flight: f.id.clone(),
            inclusion: Inclusion::Excluded,
            option: 0,
            slot: None,
            fca: None,
            slot_time: None,
            marked: Vec::new(),
            ground_delay_s: 0,
            relative_cost: f.tos.first().map_or(0.0, |o| o.relative_cost),
        });
    }
    Ok(AllocationResult { assignments, slots })
}
