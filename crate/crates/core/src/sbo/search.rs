use crate::rates::RatePlan;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::time::{Duration, Instant};

const TRACE_HEADER: &str = "# ctop-trace v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveKind {
    Start,
    Exploratory,
    Pattern,
    Shrink,
}

impl fmt::Display for MoveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MoveKind::Start => "start",
            MoveKind::Exploratory => "exploratory",
            MoveKind::Pattern => "pattern",
            MoveKind::Shrink => "shrink",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub kind: MoveKind,
    pub point: Vec<i64>,
    pub objective: f64,
    /// Best objective so far, after this move.
    pub best: f64,
    pub step: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TraceRow {
    iteration: usize,
    #[serde(rename = "move")]
    kind: MoveKind,
    objective: f64,
    best: f64,
    step: i64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchTrace {
    pub entries: Vec<TraceEntry>,
}

impl SearchTrace {
    pub fn best(&self) -> f64 {
        self.entries.last().map_or(f64::INFINITY, |e| e.best)
    }

    /// Columns: iteration, move, objective, best so far, step. Points are
    /// not written.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for e in &self.entries {
            w.serialize(TraceRow { iteration: e.iteration, kind: e.kind, objective: e.objective, best: e.best, step: e.step })
                .expect("in-memory write");
        }
        let body = String::from_utf8(w.into_inner().expect("flush")).expect("utf8");
        format!("{TRACE_HEADER}\n{body}")
    }

    /// Reads a trace CSV back; points come back empty.
    pub fn from_csv(text: &str) -> Result<Self, String> {
        let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
        if first.trim_end() != TRACE_HEADER {
            return Err(format!("trace csv: expected version line `{TRACE_HEADER}`"));
        }
        let rows: Vec<TraceRow> = csv::Reader::from_reader(rest.as_bytes())
            .deserialize()
            .collect::<Result<_, _>>()
            .map_err(|e| format!("trace csv: {e}"))?;
        let entries = rows
            .into_iter()
            .map(|r| TraceEntry {
                iteration: r.iteration,
                kind: r.kind,
                point: Vec::new(),
                objective: r.objective,
                best: r.best,
                step: r.step,
            })
            .collect();
        Ok(Self { entries })
    }
}

impl FromStr for MoveKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [MoveKind::Start, MoveKind::Exploratory, MoveKind::Pattern, MoveKind::Shrink]
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| format!("unknown move `{s}`"))
    }
}

/// Box-constrained integer search settings.
#[derive(Debug, Clone, PartialEq)]
pub struct IntSearchConfig {
    pub lower: Vec<i64>,
    pub upper: Vec<i64>,
    pub initial_step: i64,
    /// Step divisor when no neighbour improves.
    pub shrink: i64,
    pub max_evaluations: usize,
    pub time_budget: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntSearchOutcome {
    pub best: Vec<i64>,
    pub value: f64,
    pub trace: SearchTrace,
    pub evaluations: usize,
    /// Stopped on the evaluation or time budget rather than convergence.
    pub exhausted: bool,
}

/// Memoised objective with an evaluation and time budget. New points in a
/// batch are evaluated in parallel; results do not depend on scheduling.
struct Evaluator<'a, F> {
    f: &'a F,
    cache: HashMap<Vec<i64>, f64>,
    evaluations: usize,
    budget: usize,
    deadline: Option<Instant>,
    exhausted: bool,
}

impl<'a, F: Fn(&[i64]) -> f64 + Sync> Evaluator<'a, F> {
    /// Values for `points` in order; `None` for points the budget did not
    /// allow.
    fn batch(&mut self, points: &[Vec<i64>]) -> Vec<Option<f64>> {
        let mut fresh: Vec<&Vec<i64>> = Vec::new();
        for p in points {
            if !self.cache.contains_key(p) && !fresh.contains(&p) {
                fresh.push(p);
            }
        }
        if self.deadline.is_some_and(|d| Instant::now() >= d) && !fresh.is_empty() {
            self.exhausted = true;
            fresh.clear();
        }
        let room = self.budget - self.evaluations;
        if fresh.len() > room {
            self.exhausted = true;
            fresh.truncate(room);
        }
        let f = self.f;
        let values: Vec<f64> = fresh
            .par_iter()
            .map(|p| {
                let v = f(p);
                if v.is_nan() {
                    f64::INFINITY
                } else {
                    v
                }
            })
            .collect();
        self.evaluations += fresh.len();
        for (p, v) in fresh.into_iter().zip(values) {
            self.cache.insert(p.clone(), v);
        }
        points.iter().map(|p| self.cache.get(p).copied()).collect()
    }

    fn one(&mut self, p: &[i64]) -> Option<f64> {
        self.batch(&[p.to_vec()])[0]
    }
}

fn clamp(p: &mut [i64], cfg: &IntSearchConfig) {
    for (i, x) in p.iter_mut().enumerate() {
        *x = (*x).clamp(cfg.lower[i], cfg.upper[i]);
    }
}

/// Evaluates every `±step` coordinate neighbour of `x`, then tries the move
/// combining each coordinate's improving direction. Returns the best of
/// these if it beats `fx`; ties go to the single moves, lower coordinate
/// first, `+` before `-`.
fn explore<F: Fn(&[i64]) -> f64 + Sync>(
    ev: &mut Evaluator<F>,
    cfg: &IntSearchConfig,
    x: &[i64],
    fx: f64,
    step: i64,
) -> (Vec<i64>, f64) {
    let mut neighbours = Vec::with_capacity(2 * x.len());
    for i in 0..x.len() {
        for d in [step, -step] {
            let mut y = x.to_vec();
            y[i] += d;
            clamp(&mut y, cfg);
            if y != x {
                neighbours.push((i, y));
            }
        }
    }
    let values = ev.batch(&neighbours.iter().map(|(_, y)| y.clone()).collect::<Vec<_>>());
    let mut best: Option<(Vec<i64>, f64)> = None;
    let mut per_coord: Vec<Option<(i64, f64)>> = vec![None; x.len()];
    for ((i, y), v) in neighbours.iter().zip(values) {
        let Some(v) = v else { continue };
        if v < fx {
            if per_coord[*i].is_none_or(|(_, pv)| v < pv) {
                per_coord[*i] = Some((y[*i], v));
            }
            if best.as_ref().is_none_or(|(_, bv)| v < *bv) {
                best = Some((y.clone(), v));
            }
        }
    }
    if per_coord.iter().filter(|c| c.is_some()).count() >= 2 {
        let mut z = x.to_vec();
        for (i, c) in per_coord.iter().enumerate() {
            if let Some((xi, _)) = c {
                z[i] = *xi;
            }
        }
        if let Some(fz) = ev.one(&z) {
            if best.as_ref().is_none_or(|(_, bv)| fz < *bv) {
                best = Some((z, fz));
            }
        }
    }
    best.unwrap_or_else(|| (x.to_vec(), fx))
}

/// Hooke-Jeeves search on integers: exploratory moves of `±step` per
/// coordinate, pattern moves along the last improvement for as long as they
/// keep improving, and step reduction when nothing improves. Stops at step 1
/// with no improving neighbour, or when a budget runs out.
pub fn search_integer<F: Fn(&[i64]) -> f64 + Sync>(seed: &[i64], f: F, cfg: &IntSearchConfig) -> IntSearchOutcome {
    let mut ev = Evaluator {
        f: &f,
        cache: HashMap::new(),
        evaluations: 0,
        budget: cfg.max_evaluations,
        deadline: cfg.time_budget.map(|d| Instant::now() + d),
        exhausted: false,
    };
    let mut base = seed.to_vec();
    clamp(&mut base, cfg);
    let mut trace = SearchTrace::default();
    let mut step = cfg.initial_step.max(1);
    let Some(mut fbase) = ev.one(&base) else {
        return IntSearchOutcome { best: base, value: f64::INFINITY, trace, evaluations: 0, exhausted: true };
    };
    let mut iteration = 0;
    let mut push = |trace: &mut SearchTrace, kind, point: &[i64], objective, best, step| {
        trace.entries.push(TraceEntry { iteration, kind, point: point.to_vec(), objective, best, step });
        iteration += 1;
    };
    push(&mut trace, MoveKind::Start, &base, fbase, fbase, step);

    while !ev.exhausted {
        let (y, fy) = explore(&mut ev, cfg, &base, fbase, step);
        if fy < fbase {
            push(&mut trace, MoveKind::Exploratory, &y, fy, fy, step);
            let mut prev = std::mem::replace(&mut base, y);
            fbase = fy;
            while !ev.exhausted {
                let mut p: Vec<i64> = base.iter().zip(&prev).map(|(b, a)| 2 * b - a).collect();
                clamp(&mut p, cfg);
                if p == base {
                    break;
                }
                let Some(fp) = ev.one(&p) else { break };
                let (z, fz) = explore(&mut ev, cfg, &p, fp, step);
                if fz < fbase {
                    push(&mut trace, MoveKind::Pattern, &z, fz, fz, step);
                    prev = std::mem::replace(&mut base, z);
                    fbase = fz;
                } else {
                    break;
                }
            }
        } else if step == 1 {
            break;
        } else {
            step = (step / cfg.shrink.max(2)).max(1);
            push(&mut trace, MoveKind::Shrink, &base, fbase, fbase, step);
        }
    }
    IntSearchOutcome { best: base, value: fbase, trace, evaluations: ev.evaluations, exhausted: ev.exhausted }
}

/// Which rates the search may change, and how.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// FCAs whose rates are searched; others stay at the seed.
    pub subset: Vec<String>,
    pub periods: Range<usize>,
    /// Per searched rate, in subset-major order; empty means
    /// `0..=default_upper` for all. Widened to contain the seed.
    pub bounds: Vec<(u32, u32)>,
    pub default_upper: u32,
    pub initial_step: u32,
    pub shrink: u32,
    pub max_evaluations: usize,
    pub time_budget: Duration,
}

impl SearchConfig {
    pub fn new(subset: Vec<String>, periods: Range<usize>) -> Self {
        Self {
            subset,
            periods,
            bounds: Vec::new(),
            default_upper: 60,
            initial_step: 4,
            shrink: 2,
            max_evaluations: 2000,
            time_budget: Duration::from_secs(300),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best: RatePlan,
    pub cost: f64,
    pub trace: SearchTrace,
    pub evaluations: usize,
    pub exhausted: bool,
}

/// Pattern search over the rates of `config.subset` in `config.periods`,
/// starting from `seed`. The objective should return infinity for plans it
/// cannot price.
pub fn pattern_search<F: Fn(&RatePlan) -> f64 + Sync>(seed: &RatePlan, objective: F, config: &SearchConfig) -> SearchResult {
    let vars: Vec<(usize, usize)> = config
        .subset
        .iter()
        .filter_map(|r| seed.index_of(r))
        .flat_map(|i| config.periods.clone().filter(|&t| t < seed.periods()).map(move |t| (i, t)))
        .collect();
    let x0: Vec<i64> = vars.iter().map(|&(i, t)| seed.rates[i][t] as i64).collect();
    let (lower, upper) = vars
        .iter()
        .enumerate()
        .map(|(k, _)| {
            let (lo, hi) = config.bounds.get(k).copied().unwrap_or((0, config.default_upper));
            ((lo as i64).min(x0[k]), (hi as i64).max(x0[k]))
        })
        .unzip();
    let cfg = IntSearchConfig {
        lower,
        upper,
        initial_step: config.initial_step as i64,
        shrink: config.shrink as i64,
        max_evaluations: config.max_evaluations,
        time_budget: Some(config.time_budget),
    };
    let decode = |x: &[i64]| {
        let mut plan = seed.clone();
        for (&(i, t), &v) in vars.iter().zip(x) {
            plan.rates[i][t] = v as u32;
        }
        plan
    };
    let out = search_integer(&x0, |x| objective(&decode(x)), &cfg);
    SearchResult {
        best: decode(&out.best),
        cost: out.value,
        trace: out.trace,
        evaluations: out.evaluations,
        exhausted: out.exhausted,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, hi: i64, step: i64) -> IntSearchConfig {
        IntSearchConfig {
            lower: vec![0; n],
            upper: vec![hi; n],
            initial_step: step,
            shrink: 2,
            max_evaluations: 10_000,
            time_budget: None,
        }
    }

    #[test]
    fn finds_minimum_of_abs() {
        let out = search_integer(&[0], |x| (x[0] - 3).abs() as f64, &cfg(1, 10, 4));
        assert_eq!(out.best, vec![3]);
        assert_eq!(out.value, 0.0);
        assert!(!out.exhausted);
    }

    #[test]
    fn local_optimum_seed_is_kept() {
        let out = search_integer(&[5], |x| (x[0] - 5).pow(2) as f64, &cfg(1, 10, 1));
        assert_eq!(out.best, vec![5]);
        assert_eq!(out.trace.entries.len(), 1);
    }

    #[test]
    fn budget_is_respected() {
        let mut c = cfg(3, 10, 4);
        c.max_evaluations = 7;
        let out = search_integer(&[0, 0, 0], |x| x.iter().map(|v| (v - 7).pow(2)).sum::<i64>() as f64, &c);
        assert!(out.evaluations <= 7);
        assert!(out.exhausted);
    }

    #[test]
    fn trace_csv_round_trip() {
        let out = search_integer(&[0, 10], |x| ((x[0] - 2).pow(2) + (x[1] - 6).pow(2)) as f64, &cfg(2, 10, 4));
        assert_eq!(out.best, vec![2, 6]);
        let text = out.trace.to_csv();
        assert!(text.starts_with("# ctop-trace v1\niteration,move,objective,best,step\n0,start,"));
        let back = SearchTrace::from_csv(&text).unwrap();
        assert_eq!(back.entries.len(), out.trace.entries.len());
        assert_eq!(back.best(), 0.0);
    }

    #[test]
    fn rate_plan_search_only_touches_subset() {
        let mut seed = RatePlan::zeros(vec!["A".into(), "B".into()], 3);
        seed.set("B", 1, 9);
        let mut c = SearchConfig::new(vec!["A".into()], 0..2);
        c.default_upper = 10;
        let r = pattern_search(&seed, |p| ((p.get("A", 0) as i64 - 4).pow(2) + p.get("A", 2) as i64) as f64, &c);
        assert_eq!(r.best.get("A", 0), 4);
        assert_eq!(r.best.get("A", 2), 0);
        assert_eq!(r.best.get("B", 1), 9);
    }
}
