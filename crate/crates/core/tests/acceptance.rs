//! Acceptance suite: one PASS/FAIL line per criterion. Runs as its own
//! harness so the report prints even when output capture is on.

mod common;

use common::*;
use ctop_core::ctop_engine::{allocate_tos, create_slots, evaluate_rates, simulate_path_demand, slot_offsets, Program};
use ctop_core::lp_solver::{solve_lp, solve_mip, SolveStatus};
use ctop_core::network::{
    derive_demand, paper_fixture, split_pathology_fixture, validate_instance, CostParams, FixtureOptions, Horizon,
    Instance,
};
use ctop_core::rates::RatePlan;
use ctop_core::sbo::{
    interpolate_capacity, saturate_iterative, saturate_uniform, search_integer, two_phase_optimize, IntSearchConfig,
    InterpolationMode, OptimizeConfig, SeedHeuristic, DEFAULT_SATURATION_LEVEL,
};
use ctop_core::stoch_models::{
    build_esom, build_semidynamic_esom, build_semidynamic_pca, build_two_stage_pca, per_scenario_costs, BuiltModel,
    CostBreakdown, PathFlows,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

/// Cost arithmetic tolerance against two-decimal reference figures.
const TABLE_TOL: f64 = 0.01;
/// Objective tolerance for the relaxation ordering.
const ORDER_TOL: f64 = 1e-6;
const MAX_SOLVE: Duration = Duration::from_secs(5);
const OPTIMIZE_BUDGET: Duration = Duration::from_secs(300);

type Outcome = Result<String, String>;

/// Solutions collected for the conservation audit.
#[derive(Default)]
struct Audit {
    checked: usize,
    violations: Vec<String>,
}

impl Audit {
    fn record(&mut self, label: &str, flows: &PathFlows<f64>, instance: &Instance) {
        self.checked += 1;
        self.violations.extend(flows.check(instance, true).into_iter().map(|v| format!("{label}: {v}")));
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ratios(inst: &Instance) -> Vec<Vec<f64>> {
    inst.arcs.iter().map(|a| a.split_ratio.clone()).collect()
}

fn criterion_1() -> Outcome {
    let names = || vec!["Scen1".to_string(), "Scen2".into(), "Scen3".into()];
    let p = vec![0.3, 0.4, 0.3];
    let costs = CostParams { ground: 1.0, air: 2.0 };
    let started = Instant::now();
    let esom = CostBreakdown::new(names(), p.clone(), vec![296.05; 3], vec![0.0, 0.0, 211.55], costs);
    let sd = CostBreakdown::new(names(), p.clone(), vec![93.80, 292.13, 507.60], vec![0.0; 3], costs);
    let two = CostBreakdown::new(names(), p, vec![284.0; 3], vec![0.0, 0.0, 200.0], costs);
    let elapsed = started.elapsed();
    let close = |a: f64, b: f64| (a - b).abs() <= TABLE_TOL;
    for (got, want) in esom.total.iter().zip([296.05, 296.05, 719.15]) {
        ensure(close(*got, want), || format!("ESOM total {got} != {want}"))?;
    }
    ensure(close(esom.expected, 422.98), || format!("ESOM expected {}", esom.expected))?;
    ensure(close(sd.expected, 297.27), || format!("SD-ESOM expected {}", sd.expected))?;
    for (got, want) in two.total.iter().zip([284.0, 284.0, 684.0]) {
        ensure(close(*got, want), || format!("two-stage total {got} != {want}"))?;
    }
    ensure(close(two.expected, 404.0), || format!("two-stage expected {}", two.expected))?;
    ensure(elapsed < Duration::from_millis(1), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "expected {:.2} / {:.2} / {:.2} in {:?}",
        esom.expected, sd.expected, two.expected, elapsed
    ))
}

fn criterion_2() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut mips, mut lps, mut infeasible) = (0, 0, 0);
    for k in 0..30 {
        let n = rng.gen_range(2..=6);
        let m = rng.gen_range(1..=8);
        let model = random_model(&mut rng, n, m, true);
        let sol = solve_mip(&model).map_err(|e| format!("mip {k}: {e}"))?;
        match lattice_min(&model) {
            Some(z) => {
                ensure(sol.status == SolveStatus::Optimal && sol.objective == z, || {
                    format!("mip {k}: solver {:?} {} vs lattice {z}", sol.status, sol.objective)
                })?;
                ensure(model.max_violation(&sol.values) <= ORACLE_TOL, || format!("mip {k}: infeasible point"))?;
            }
            None => {
                infeasible += 1;
                ensure(sol.status == SolveStatus::Infeasible, || format!("mip {k}: solver {:?}, lattice empty", sol.status))?;
            }
        }
        mips += 1;
    }
    for k in 0..30 {
        let n = rng.gen_range(2..=6);
        let m = rng.gen_range(1..=6);
        let model = random_model(&mut rng, n, m, false);
        let sol = solve_lp(&model).map_err(|e| format!("lp {k}: {e}"))?;
        match vertex_min(&model) {
            Some(z) => ensure(sol.status == SolveStatus::Optimal && (sol.objective - z).abs() <= ORACLE_TOL, || {
                format!("lp {k}: solver {:?} {} vs vertices {z}", sol.status, sol.objective)
            })?,
            None => {
                infeasible += 1;
                ensure(sol.status == SolveStatus::Infeasible, || format!("lp {k}: solver {:?}, no vertex", sol.status))?;
            }
        }
        lps += 1;
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("{mips} MIPs, {lps} LPs ({infeasible} infeasible) agree in {elapsed:.2?}"))
}

fn solve_pca(label: &str, built: &BuiltModel, inst: &Instance, audit: &mut Audit) -> Result<f64, String> {
    let sol = built.solve().map_err(|e| format!("{label}: {e}"))?;
    ensure(sol.is_optimal(), || format!("{label}: {}", sol.status))?;
    if let Some(flows) = built.path_flows(&sol) {
        audit.record(label, &flows, inst);
    }
    Ok(sol.objective)
}

fn criterion_3(audit: &mut Audit) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut gaps = Vec::new();
    let mut cases = 0;
    for k in 0..16 {
        let scenarios = if k < 12 { 2 + k % 2 } else { 1 };
        let inst = random_instance(&mut rng, scenarios);
        let report = validate_instance(&inst);
        ensure(report.is_valid(), || format!("instance {k}: {:?}", report.messages()))?;
        let d = derive_demand(&inst.flights, &inst).map_err(|e| e.to_string())?;
        let r = ratios(&inst);
        let esom = build_esom(&inst, &d, &r).solve().map_err(|e| e.to_string())?;
        let sd_esom = build_semidynamic_esom(&inst, &d, &r).solve().map_err(|e| e.to_string())?;
        ensure(esom.is_optimal() && sd_esom.is_optimal(), || format!("instance {k}: ESOM not optimal"))?;
        let two = build_two_stage_pca(&inst, &d).map_err(|e| e.to_string())?;
        let sd = build_semidynamic_pca(&inst, &d).map_err(|e| e.to_string())?;
        let two = solve_pca(&format!("c3 #{k} pca2"), &two, &inst, audit)?;
        let sd = solve_pca(&format!("c3 #{k} sd-pca"), &sd, &inst, audit)?;
        if scenarios == 1 {
            ensure((sd_esom.objective - esom.objective).abs() <= ORDER_TOL, || {
                format!("instance {k}: single-scenario ESOM {} vs {}", sd_esom.objective, esom.objective)
            })?;
            ensure((sd - two).abs() <= ORDER_TOL, || format!("instance {k}: single-scenario PCA {sd} vs {two}"))?;
        } else {
            ensure(sd_esom.objective <= esom.objective + ORDER_TOL, || {
                format!("instance {k}: SD-ESOM {} > ESOM {}", sd_esom.objective, esom.objective)
            })?;
            ensure(sd <= two + ORDER_TOL, || format!("instance {k}: SD-PCA {sd} > two-stage {two}"))?;
            gaps.push(two - sd);
        }
        cases += 1;
    }
    let strict = gaps.iter().filter(|&&g| g > ORDER_TOL).count();
    Ok(format!("{cases} instances ordered; SD-PCA strictly better on {strict} of {}", gaps.len()))
}

fn criterion_4() -> Outcome {
    let inst = split_pathology_fixture();
    let d = derive_demand(&inst.flights, &inst).map_err(|e| e.to_string())?;
    let scheduled_pca2: u32 = d.path(1).map_or(0, |row| row.iter().sum());
    ensure(scheduled_pca2 == 0, || format!("{scheduled_pca2} flights scheduled via PCA2"))?;
    let esom = build_esom(&inst, &d, &ratios(&inst));
    let sol = esom.solve().map_err(|e| e.to_string())?;
    let into_pca2: f64 = esom.pca_crossings(&sol)["PCA2"][0].iter().sum();
    ensure(into_pca2 > ORDER_TOL, || format!("ESOM sends {into_pca2} into PCA2"))?;
    let pca = build_two_stage_pca(&inst, &d).map_err(|e| e.to_string())?;
    let sol = pca.solve().map_err(|e| e.to_string())?;
    let crossings = pca.pca_crossings(&sol);
    let pca1: f64 = crossings["PCA1"][0].iter().sum();
    let pca2: f64 = crossings["PCA2"][0].iter().sum();
    ensure(pca1 == 2.0 && pca2 == 0.0, || format!("two-stage PCA crosses PCA1 {pca1}, PCA2 {pca2}"))?;
    let flows = pca.path_flows(&sol).ok_or("two-stage PCA has no path flows")?;
    let v = flows.check(&inst, true);
    ensure(v.is_empty(), || v.join("; "))?;
    Ok(format!("ESOM puts {into_pca2:.2} flights into PCA2; two-stage PCA keeps 2 on PCA1"))
}

fn criterion_5() -> Outcome {
    let expected: [(u32, &[i64]); 3] = [
        (1, &[0]),
        (4, &[0, 225, 450, 675]),
        (13, &[0, 69, 138, 208, 277, 346, 415, 485, 554, 623, 692, 762, 831]),
    ];
    let plan = RatePlan { resources: vec!["F".into()], rates: vec![expected.iter().map(|e| e.0).collect()] };
    let table = create_slots(&plan, &Horizon { start_time: 0, active_periods: 3, padding_periods: 0 });
    for (t, (p, offsets)) in expected.iter().enumerate() {
        let got: Vec<i64> = table.slots[0][t].iter().map(|s| s.offset).collect();
        ensure(got == *offsets, || format!("P={p}: {got:?}"))?;
        ensure(slot_offsets(*p) == *offsets, || format!("slot_offsets({p}) disagrees"))?;
    }
    Ok("offsets for P = 1, 4, 13 exact".into())
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let horizon = Horizon { start_time: 0, active_periods: 8, padding_periods: 4 };
    let horizon_s = 900 * horizon.active_periods as i64;
    let (mut sets, mut overflow, mut flights_seen) = (0, 0, 0);
    while sets < 120 {
        let n = rng.gen_range(1..=25);
        let flights = random_flights(&mut rng, n, horizon_s);
        let mut plan = RatePlan::zeros(vec!["A".into(), "B".into(), "C".into()], horizon.len());
        plan.rates.iter_mut().flatten().for_each(|r| *r = rng.gen_range(0..=4));
        let mut program = Program { windows: Default::default() };
        for fca in ["A", "B", "C"] {
            if rng.gen_bool(0.85) {
                let from = 900 * rng.gen_range(0..3);
                program.windows.insert(fca.into(), (from, horizon_s - 900 * rng.gen_range(0..3)));
            }
        }
        let fresh = create_slots(&plan, &horizon);
        let first = allocate_tos(&program, &flights, fresh.clone());
        let second = allocate_tos(&program, &flights, fresh.clone());
        match (first, second) {
            (Ok(a), Ok(b)) => {
                ensure(a == b, || format!("set {sets}: allocation not deterministic"))?;
                let errors = audit_allocation(&program, &flights, &fresh, &a);
                ensure(errors.is_empty(), || format!("set {sets}: {}", errors.join("; ")))?;
                flights_seen += n;
            }
            (Err(a), Err(b)) => {
                ensure(a.to_string() == b.to_string(), || format!("set {sets}: errors differ"))?;
                overflow += 1;
            }
            _ => return Err(format!("set {sets}: one run failed, the other did not")),
        }
        sets += 1;
    }
    ensure(sets - overflow >= 100, || format!("only {} complete allocations", sets - overflow))?;
    Ok(format!("{} flight sets ({flights_seen} flights) audited, {overflow} overflowed identically", sets - overflow))
}

fn criterion_7(audit: &mut Audit) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut feasible, mut infeasible) = (0, 0);
    let mut total_hold = 0u64;
    while feasible < 60 {
        let t_len = rng.gen_range(5..=9);
        let nodes = rng.gen_range(1..=3);
        let gaps: Vec<usize> = (1..nodes).map(|_| rng.gen_range(1..=2)).collect();
        let caps: Vec<Vec<u32>> = (0..nodes)
            .map(|_| (0..t_len).map(|t| if t + 2 >= t_len { 6 } else { rng.gen_range(0..=3) }).collect())
            .collect();
        let arrivals: Vec<u32> = (0..t_len).map(|t| if t + 3 < t_len { rng.gen_range(0..=4) } else { 0 }).collect();
        let inst = tandem_instance(&caps, &gaps);
        let oracle = fcfs_holding(&arrivals, &caps, &gaps);
        let sim = simulate_path_demand(&inst, vec![arrivals.iter().map(|&x| x as f64).collect()]);
        match (oracle, sim) {
            (Some(h), Ok(r)) => {
                ensure(r.holds == vec![h as f64], || format!("{arrivals:?} {caps:?}: model {:?}, FCFS {h}", r.holds))?;
                ensure(r.expected_air_cost == inst.costs.air * h as f64, || "air cost mismatch".into())?;
                audit.record(&format!("c7 #{feasible}"), &r.flows, &inst);
                total_hold += h;
                feasible += 1;
            }
            (None, Err(_)) => infeasible += 1,
            (o, s) => return Err(format!("{arrivals:?} {caps:?}: FCFS {o:?}, model {:?}", s.map(|r| r.holds))),
        }
    }
    Ok(format!("{feasible} profiles match FCFS exactly ({total_hold} holding periods), {infeasible} infeasible in both"))
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut runs = 0;
    for dims in [1usize, 2, 3] {
        for _ in 0..8 {
            let target: Vec<i64> = (0..dims).map(|_| rng.gen_range(0..=10)).collect();
            let weight: Vec<f64> = (0..dims).map(|_| rng.gen_range(1..=4) as f64).collect();
            let f = |x: &[i64]| -> f64 {
                x.iter().zip(&target).zip(&weight).map(|((a, b), w)| w * ((a - b) as f64).powi(2)).sum()
            };
            // Brute force over the whole 0..=10 box.
            let mut best = f64::INFINITY;
            let mut x = vec![0i64; dims];
            'grid: loop {
                best = best.min(f(&x));
                for v in x.iter_mut() {
                    if *v < 10 {
                        *v += 1;
                        continue 'grid;
                    }
                    *v = 0;
                }
                break;
            }
            let seed: Vec<i64> = (0..dims).map(|_| rng.gen_range(0..=10)).collect();
            let cfg = IntSearchConfig {
                lower: vec![0; dims],
                upper: vec![10; dims],
                initial_step: 4,
                shrink: 2,
                max_evaluations: 10_000,
                time_budget: None,
            };
            let out = search_integer(&seed, f, &cfg);
            ensure(out.value == best, || format!("{dims}-D target {target:?}: found {} at {:?}", out.value, out.best))?;
            let bests: Vec<f64> = out.trace.entries.iter().map(|e| e.best).collect();
            ensure(bests.windows(2).all(|w| w[1] <= w[0]), || format!("best-so-far rises: {bests:?}"))?;
            for budget in [1, 3, 7] {
                let out = search_integer(&seed, f, &IntSearchConfig { max_evaluations: budget, ..cfg.clone() });
                ensure(out.evaluations <= budget, || format!("budget {budget}: {} evaluations", out.evaluations))?;
            }
            runs += 1;
        }
    }
    Ok(format!("{runs} searches reach the brute-force optimum; budgets of 1, 3, 7 respected"))
}

fn timed<T>(slowest: &mut Duration, f: impl FnOnce() -> T) -> T {
    let started = Instant::now();
    let out = f();
    *slowest = (*slowest).max(started.elapsed());
    out
}

fn criterion_9(audit: &mut Audit) -> Outcome {
    let inst = paper_fixture(&FixtureOptions::default());
    let d = derive_demand(&inst.flights, &inst).map_err(|e| e.to_string())?;
    let mut slowest = Duration::ZERO;
    let r = ratios(&inst);
    for (label, built) in [
        ("esom", build_esom(&inst, &d, &r)),
        ("sd-esom", build_semidynamic_esom(&inst, &d, &r)),
        ("pca2", build_two_stage_pca(&inst, &d).map_err(|e| e.to_string())?),
        ("sd-pca", build_semidynamic_pca(&inst, &d).map_err(|e| e.to_string())?),
    ] {
        let sol = timed(&mut slowest, || built.solve()).map_err(|e| format!("{label}: {e}"))?;
        ensure(sol.is_optimal(), || format!("{label}: {}", sol.status))?;
        let costs = per_scenario_costs(&sol, &built, &inst);
        ensure((costs.expected - sol.objective).abs() < 1e-6, || format!("{label}: cost split disagrees"))?;
        if let Some(flows) = built.path_flows(&sol) {
            audit.record(&format!("c9 {label}"), &flows, &inst);
        }
    }

    let seeds = [
        SeedHeuristic::Uniform { level: DEFAULT_SATURATION_LEVEL },
        SeedHeuristic::Iterative { max_iter: 8 },
        SeedHeuristic::Interpolate(InterpolationMode::Median),
    ];
    // Seed plans evaluated on their own, timing each pipeline run.
    let plans = [
        saturate_uniform(&inst, DEFAULT_SATURATION_LEVEL).map_err(|e| e.to_string())?,
        saturate_iterative(&inst, 8).map_err(|e| e.to_string())?.rates,
        interpolate_capacity(&inst, InterpolationMode::Median),
    ];
    for (seed, plan) in seeds.iter().zip(&plans) {
        let eval = timed(&mut slowest, || evaluate_rates(plan, &inst)).map_err(|e| format!("{seed}: {e}"))?;
        audit.record(&format!("c9 {seed} seed"), &eval.flow.flows, &inst);
    }

    let started = Instant::now();
    let config = OptimizeConfig { time_budget: OPTIMIZE_BUDGET, ..OptimizeConfig::default() };
    let report = two_phase_optimize(&inst, &seeds, &config).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    ensure(elapsed <= OPTIMIZE_BUDGET + Duration::from_secs(30), || format!("optimizer took {elapsed:?}"))?;
    let min_seed = report.seeds.iter().map(|s| s.seed_cost).fold(f64::INFINITY, f64::min);
    ensure(report.best_cost <= min_seed, || format!("best {} > seed minimum {min_seed}", report.best_cost))?;
    for s in &report.seeds {
        ensure(s.refined_cost <= s.seed_cost, || format!("{} refined to {} from {}", s.seed, s.refined_cost, s.seed_cost))?;
    }
    let best = timed(&mut slowest, || evaluate_rates(&report.best, &inst)).map_err(|e| e.to_string())?;
    ensure((best.cost.total - report.best_cost).abs() < 1e-9, || "best plan re-evaluates differently".into())?;
    audit.record("c9 best", &best.flow.flows, &inst);
    ensure(slowest < MAX_SOLVE, || format!("slowest solve {slowest:?}"))?;
    let seeds_txt: Vec<String> =
        report.seeds.iter().map(|s| format!("{} {:.2}->{:.2}", s.seed, s.seed_cost, s.refined_cost)).collect();
    Ok(format!(
        "best {:.2} <= {min_seed:.2} in {elapsed:.1?} [{}]; slowest solve {slowest:.2?}",
        report.best_cost,
        seeds_txt.join(", ")
    ))
}

fn criterion_10(audit: &Audit) -> Outcome {
    ensure(audit.checked > 0, || "no solutions were collected".into())?;
    ensure(audit.violations.is_empty(), || audit.violations.iter().take(5).cloned().collect::<Vec<_>>().join("; "))?;
    Ok(format!("{} solutions: capacity, terminal holds and per-path totals hold", audit.checked))
}

fn main() {
    // `cargo test` passes harness flags; a name filter that excludes this
    // target's name skips it, as a libtest harness would.
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    if filter.as_deref().is_some_and(|f| !"acceptance".contains(f)) {
        return;
    }
    let mut audit = Audit::default();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut run = |n: usize, name: &'static str, f: &mut dyn FnMut(&mut Audit) -> Outcome| {
        let started = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(|| f(&mut audit))).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let tag = if out.is_ok() { "PASS" } else { "FAIL" };
        let detail = match &out {
            Ok(s) | Err(s) => s,
        };
        println!("criterion {n:>2} {tag} {name} ({:.2?}): {detail}", started.elapsed());
        results.push((n, name, out));
    };
    run(1, "cost table arithmetic", &mut |_| criterion_1());
    run(2, "solver oracle", &mut |_| criterion_2());
    run(3, "relaxation ordering", &mut criterion_3);
    run(4, "split-ratio pathology", &mut |_| criterion_4());
    run(5, "slot offsets", &mut |_| criterion_5());
    run(6, "allocation invariants", &mut |_| criterion_6());
    run(7, "flow simulation oracle", &mut criterion_7);
    run(8, "pattern search", &mut |_| criterion_8());
    run(9, "end-to-end fixture", &mut criterion_9);
    run(10, "boundary and conservation", &mut |a| criterion_10(a));
    let failed: Vec<usize> = results.iter().filter(|r| r.2.is_err()).map(|r| r.0).collect();
    println!("acceptance: {} of {} criteria pass", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
