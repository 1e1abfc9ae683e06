//! Depth-first branch-and-bound over the simplex relaxation.

use super::simplex::{solve_with_bounds, SimplexOptions};
use super::{MathModel, MathSolution, SolveStatus, SolverError, VarKind};

#[derive(Debug, Clone, Copy)]
pub struct MipOptions {
    pub lp: SimplexOptions,
    /// Distance from an integer below which a value counts as integral.
    pub int_tol: f64,
    /// Abort with [`SolverError::NodeLimit`] after this many LP solves.
    pub node_limit: Option<usize>,
}

impl Default for MipOptions {
    fn default() -> Self {
        Self { lp: SimplexOptions::default(), int_tol: 1e-7, node_limit: None }
    }
}

pub fn solve_mip(model: &MathModel) -> Result<MathSolution, SolverError> {
    solve_mip_with(model, &MipOptions::default())
}

/// Branches on the most fractional integer variable (lowest index on ties),
/// exploring depth-first and pruning nodes whose relaxation bound cannot beat
/// the incumbent.
pub fn solve_mip_with(model: &MathModel, opts: &MipOptions) -> Result<MathSolution, SolverError> {
    model.check()?;
    let n = model.num_vars();
    let is_int: Vec<bool> = model.variables.iter().map(|v| v.kind == VarKind::Integer).collect();
    let mut lower: Vec<f64> = model.variables.iter().map(|v| v.lower).collect();
    let mut upper: Vec<f64> = model.variables.iter().map(|v| v.upper).collect();
    for j in 0..n {
        if is_int[j] {
            lower[j] = (lower[j] - opts.int_tol).ceil();
            if upper[j].is_finite() {
                upper[j] = (upper[j] + opts.int_tol).floor();
            }
        }
    }

    // When every objective term sits on an integer variable with an integer
    // coefficient, any improving incumbent must be at least one unit better.
    let integral_objective = model
        .objective_dense()
        .iter()
        .enumerate()
        .all(|(j, &c)| c == 0.0 || (is_int[j] && c.fract() == 0.0));

    let mut stack: Vec<(Vec<f64>, Vec<f64>)> = vec![(lower, upper)];
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut nodes = 0usize;
    let mut root = true;

    while let Some((lo, hi)) = stack.pop() {
        nodes += 1;
        if let Some(limit) = opts.node_limit {
            if nodes > limit {
                return Err(SolverError::NodeLimit(limit));
            }
        }
        let relax = solve_with_bounds(model, &lo, &hi, &opts.lp)?;
        match relax.status {
            SolveStatus::Infeasible => {
                root = false;
                continue;
            }
            SolveStatus::Unbounded => {
                if root {
                    return Ok(MathSolution::unbounded());
                }
                continue;
            }
            SolveStatus::Optimal => {}
        }
        root = false;
        if let Some((best, _)) = &incumbent {
            let bound = if integral_objective { (relax.objective - 1e-6).ceil() } else { relax.objective };
            if bound >= best - 1e-9 {
                continue;
            }
        }

        let mut branch: Option<(usize, f64)> = None;
        let mut best_dist = opts.int_tol;
        for j in 0..n {
            if !is_int[j] {
                continue;
            }
            let x = relax.values[j];
            let frac = x - x.floor();
            let dist = frac.min(1.0 - frac);
            if dist > best_dist {
                best_dist = dist;
                branch = Some((j, x));
            }
        }

        match branch {
            None => {
                let mut values = relax.values;
                for j in 0..n {
                    if is_int[j] {
                        values[j] = values[j].round();
                    }
                }
                let obj = model.objective_value(&values);
                if incumbent.as_ref().is_none_or(|(best, _)| obj < *best - 1e-9) {
                    incumbent = Some((obj, values));
                }
            }
            Some((j, x)) => {
                let mut down_hi = hi.clone();
                down_hi[j] = x.floor();
                let mut up_lo = lo.clone();
                up_lo[j] = x.ceil();
                let down = (lo, down_hi);
                let up = (up_lo, hi);
                // The child on the rounding side is explored first.
                if x - x.floor() <= 0.5 {
                    stack.push(up);
                    stack.push(down);
                } else {
                    stack.push(down);
                    stack.push(up);
                }
            }
        }
    }

    Ok(match incumbent {
        Some((objective, values)) => MathSolution { status: SolveStatus::Optimal, objective, values },
        None => MathSolution::infeasible(),
    })
}
