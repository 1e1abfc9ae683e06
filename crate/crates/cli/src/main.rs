use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use ctop_core::ctop_engine::{evaluate_rates, EngineError};
use ctop_core::network::{
    derive_demand, paper_fixture, read_instance, validate_instance, write_capacity_csv, write_instance, FixtureOptions,
    Instance,
};
use ctop_core::rates::RatePlan;
use ctop_core::sbo::{two_phase_optimize, OptimizeConfig, OptimizeReport, SboError, SeedHeuristic};
use ctop_core::stoch_models::{
    build_esom, build_semidynamic_esom, build_semidynamic_pca, build_two_stage_pca, extract_fca_rates,
    per_scenario_costs, write_cost_csv, CostBreakdown, CostRow, ModelKind, StochError,
};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

/// Environment variable naming the default output directory.
const OUT_DIR_ENV: &str = "CTOP_OUT_DIR";

#[derive(Parser)]
#[command(name = "ctop", version, about = "Plan and evaluate FCA acceptance rates for multi-FCA trajectory options programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the built-in weather fixture: instance document and capacity CSV.
    Fixture {
        #[command(flatten)]
        out: OutArgs,
        /// Number of synthetic flights.
        #[arg(long = "flights-n", default_value_t = 50)]
        flights_n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[command(flatten)]
        costs: CostArgs,
    },
    /// Check an instance document; exit 1 and list violations if invalid.
    Validate { instance: PathBuf },
    /// Solve one stochastic model and write its rates and cost table.
    Solve {
        instance: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(ModelKind))]
        model: ModelKind,
        #[command(flatten)]
        out: OutArgs,
        #[command(flatten)]
        costs: CostArgs,
    },
    /// Run a rate plan through slot allocation and flow simulation.
    Evaluate {
        instance: PathBuf,
        rates: PathBuf,
        #[command(flatten)]
        out: OutArgs,
        #[command(flatten)]
        costs: CostArgs,
    },
    /// Seed heuristics followed by pattern search.
    Optimize {
        instance: PathBuf,
        /// Comma-separated: uniform, iterative, weighted, median.
        #[arg(long, value_delimiter = ',', default_value = "uniform,iterative,median")]
        seeds: Vec<SeedHeuristic>,
        /// Wall-clock budget in seconds for the whole run.
        #[arg(long = "budget-s", default_value_t = 300.0)]
        budget_s: f64,
        /// Comma-separated FCAs to search; defaults to the two most congested.
        #[arg(long, value_delimiter = ',')]
        subset: Option<Vec<String>>,
        /// Objective evaluations allowed per seed.
        #[arg(long = "max-evals", default_value_t = 2000)]
        max_evals: usize,
        #[command(flatten)]
        out: OutArgs,
        #[command(flatten)]
        costs: CostArgs,
    },
}

#[derive(Args)]
struct OutArgs {
    /// Output directory [default: $CTOP_OUT_DIR, else the working directory].
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OutArgs {
    fn dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

#[derive(Args)]
struct CostArgs {
    /// Ground-holding cost per flight and period.
    #[arg(long)]
    cg: Option<f64>,
    /// Air-holding cost per flight and period.
    #[arg(long)]
    ca: Option<f64>,
    /// Comma-separated scenario probabilities.
    #[arg(long, value_delimiter = ',')]
    probs: Option<Vec<f64>>,
}

impl CostArgs {
    fn apply(&self, inst: &mut Instance) -> Result<(), CliError> {
        if let Some(cg) = self.cg {
            inst.costs.ground = cg;
        }
        if let Some(ca) = self.ca {
            inst.costs.air = ca;
        }
        if let Some(p) = &self.probs {
            if p.len() != inst.num_scenarios() {
                return Err(CliError::usage(anyhow!(
                    "--probs has {} values for {} scenarios",
                    p.len(),
                    inst.num_scenarios()
                )));
            }
            for (s, &x) in inst.scenario_tree.scenarios.iter_mut().zip(p) {
                s.probability = x;
            }
        }
        Ok(())
    }
}

/// An error with the exit code it maps to: 1 for domain failures, 2 for
/// usage and I/O.
struct CliError {
    code: u8,
    err: anyhow::Error,
}

impl CliError {
    fn domain(err: impl Into<anyhow::Error>) -> Self {
        Self { code: 1, err: err.into() }
    }

    fn usage(err: impl Into<anyhow::Error>) -> Self {
        Self { code: 2, err: err.into() }
    }
}

impl From<SboError> for CliError {
    fn from(e: SboError) -> Self {
        match e {
            SboError::Network(n) => Self::usage(n),
            other => Self::domain(other),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {:#}", e.err);
            ExitCode::from(e.code)
        }
    }
}

fn run(command: Command) -> Result<ExitCode, CliError> {
    println!("# {}", std::env::args().collect::<Vec<_>>().join(" "));
    match command {
        Command::Fixture { out, flights_n, seed, costs } => cmd_fixture(&out.dir(), flights_n, seed, &costs),
        Command::Validate { instance } => cmd_validate(&instance),
        Command::Solve { instance, model, out, costs } => cmd_solve(&load(&instance, &costs)?, model, &out.dir()),
        Command::Evaluate { instance, rates, out, costs } => cmd_evaluate(&load(&instance, &costs)?, &rates, &out.dir()),
        Command::Optimize { instance, seeds, budget_s, subset, max_evals, out, costs } => {
            if !(budget_s.is_finite() && budget_s >= 0.0) {
                return Err(CliError::usage(anyhow!("--budget-s must be a non-negative number of seconds")));
            }
            let config = OptimizeConfig {
                subset,
                time_budget: Duration::from_secs_f64(budget_s),
                max_evaluations: max_evals,
                ..OptimizeConfig::default()
            };
            cmd_optimize(&load(&instance, &costs)?, &seeds, &config, &out.dir())
        }
    }
}

fn load(path: &Path, costs: &CostArgs) -> Result<Instance, CliError> {
    let mut inst = read_instance(path).with_context(|| format!("reading {}", path.display())).map_err(CliError::usage)?;
    costs.apply(&mut inst)?;
    let report = validate_instance(&inst);
    if !report.is_valid() {
        return Err(CliError::domain(anyhow!("invalid instance:\n  {}", report.messages().join("\n  "))));
    }
    println!("{}", summary(&inst));
    Ok(inst)
}

fn summary(inst: &Instance) -> String {
    format!(
        "instance {}: {} FCAs, {} PCAs, {} paths, {} scenarios, {} flights, {} periods ({} active)",
        inst.name,
        inst.fcas().len(),
        inst.pcas().len(),
        inst.paths.len(),
        inst.num_scenarios(),
        inst.flights.len(),
        inst.num_periods(),
        inst.horizon.active_periods,
    )
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(CliError::usage)?;
    let path = dir.join(name);
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display())).map_err(CliError::usage)?;
    println!("wrote {}", path.display());
    Ok(path)
}

fn cmd_fixture(dir: &Path, flights: usize, seed: u64, costs: &CostArgs) -> Result<ExitCode, CliError> {
    let mut inst = paper_fixture(&FixtureOptions { flights, seed, ..FixtureOptions::default() });
    costs.apply(&mut inst)?;
    println!("{}", summary(&inst));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(CliError::usage)?;
    let path = dir.join("fixture.json");
    write_instance(&path, &inst).with_context(|| format!("writing {}", path.display())).map_err(CliError::usage)?;
    println!("wrote {}", path.display());
    write(dir, "capacities.csv", &write_capacity_csv(&inst))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(path: &Path) -> Result<ExitCode, CliError> {
    let inst = read_instance(path).with_context(|| format!("reading {}", path.display())).map_err(CliError::usage)?;
    println!("{}", summary(&inst));
    let report = validate_instance(&inst);
    if report.is_valid() {
        println!("valid");
        return Ok(ExitCode::SUCCESS);
    }
    for m in report.messages() {
        println!("violation: {m}");
    }
    Ok(ExitCode::from(1))
}

fn cost_table(b: &CostBreakdown) -> String {
    let mut s = format!("{:<10}", "");
    for name in &b.scenarios {
        let _ = write!(s, "{name:>10}");
    }
    for (label, row) in [("ground", &b.ground), ("air", &b.air), ("total", &b.total)] {
        let _ = write!(s, "\n{label:<10}");
        for x in row {
            let _ = write!(s, "{x:>10.2}");
        }
    }
    let _ = write!(s, "\nexpected cost {:.2}", b.expected);
    s
}

fn cmd_solve(inst: &Instance, kind: ModelKind, dir: &Path) -> Result<ExitCode, CliError> {
    let demand = derive_demand(&inst.flights, inst).map_err(CliError::domain)?;
    let ratios: Vec<Vec<f64>> = inst.arcs.iter().map(|a| a.split_ratio.clone()).collect();
    let started = Instant::now();
    let built = match kind {
        ModelKind::Esom => build_esom(inst, &demand, &ratios),
        ModelKind::SemiDynamicEsom => build_semidynamic_esom(inst, &demand, &ratios),
        ModelKind::TwoStagePca => build_two_stage_pca(inst, &demand).map_err(CliError::domain)?,
        ModelKind::SemiDynamicPca => build_semidynamic_pca(inst, &demand).map_err(CliError::domain)?,
    };
    let sol = built.solve().map_err(CliError::domain)?;
    let seconds = started.elapsed().as_secs_f64();
    println!(
        "model {}: {} vars, {} constraints, {} in {seconds:.3} s",
        kind.title(),
        built.model.num_vars(),
        built.model.num_constraints(),
        sol.status
    );
    if !sol.is_optimal() {
        return Err(CliError::domain(StochError::NotOptimal(sol.status)));
    }
    let costs = per_scenario_costs(&sol, &built, inst);
    println!("{}", cost_table(&costs));
    let plans = extract_fca_rates(&sol, &built).map_err(CliError::domain)?;
    if plans.len() == 1 {
        write(dir, &format!("rates_{kind}.csv"), &plans[0].to_csv(&inst.horizon))?;
    } else {
        for (plan, s) in plans.iter().zip(&inst.scenario_tree.scenarios) {
            write(dir, &format!("rates_{kind}_{}.csv", s.name), &plan.to_csv(&inst.horizon))?;
        }
    }
    write(dir, &format!("costs_{kind}.csv"), &write_cost_csv(&[CostRow::new(kind.title(), &costs, seconds)]))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_evaluate(inst: &Instance, rates_path: &Path, dir: &Path) -> Result<ExitCode, CliError> {
    let text = std::fs::read_to_string(rates_path)
        .with_context(|| format!("reading {}", rates_path.display()))
        .map_err(CliError::usage)?;
    let rates = RatePlan::from_csv(&text).map_err(CliError::usage)?;
    let e = match evaluate_rates(&rates, inst) {
        Ok(e) => e,
        Err(err @ EngineError::Overflow { .. }) => return Err(CliError::domain(err)),
        Err(err @ (EngineError::Csv(_) | EngineError::Network(_))) => return Err(CliError::usage(err)),
        Err(err) => return Err(CliError::domain(err)),
    };
    println!("reroute {:.2}", e.cost.reroute);
    println!("ground  {:.2}", e.cost.ground);
    println!("air     {:.2}", e.cost.air);
    println!("total   {:.2}", e.cost.total);
    write(dir, "allocation.csv", &e.allocation.to_csv())?;
    Ok(ExitCode::SUCCESS)
}

fn report_table(r: &OptimizeReport) -> String {
    let mut s = format!("{:<10}{:>12}{:>14}{:>8}{:>10}", "seed", "seed cost", "refined cost", "gain %", "seconds");
    for x in &r.seeds {
        let gain = if x.seed_cost.is_finite() && x.seed_cost > 0.0 {
            format!("{:.1}", 100.0 * (x.seed_cost - x.refined_cost) / x.seed_cost)
        } else {
            "-".into()
        };
        let _ = write!(s, "\n{:<10}{:>12.2}{:>14.2}{gain:>8}{:>10.1}", x.seed, x.seed_cost, x.refined_cost, x.seconds);
    }
    s
}

fn cmd_optimize(
    inst: &Instance,
    seeds: &[SeedHeuristic],
    config: &OptimizeConfig,
    dir: &Path,
) -> Result<ExitCode, CliError> {
    let report = two_phase_optimize(inst, seeds, config)?;
    println!("searching {}", report.subset.join(", "));
    println!("{}", report_table(&report));
    if !report.best_cost.is_finite() {
        return Err(CliError::domain(anyhow!("no seed produced rates that place every flight")));
    }
    println!("best cost {:.2} from {}", report.best_cost, report.seeds[report.best_seed].seed);
    write(dir, "best_rates.csv", &report.best.to_csv(&inst.horizon))?;
    for s in &report.seeds {
        write(dir, &format!("trace_{}.csv", s.seed), &s.trace.to_csv())?;
    }
    write(dir, "optimize_report.csv", &report.to_csv())?;
    Ok(ExitCode::SUCCESS)
}
