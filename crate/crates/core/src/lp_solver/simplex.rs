//! Bounded-variable primal simplex on a dense tableau.
//!
//! Variables are shifted to `[0, upper - lower]`; nonbasic columns sit at
//! either bound. Phase 1 minimizes the sum of artificials, phase 2 the model
//! objective. Pricing is Dantzig's rule until a run of degenerate pivots is
//! seen, after which Bland's rule is used for the rest of the phase, which
//! guarantees termination.

use super::{MathModel, MathSolution, Relation, SolveStatus, SolverError};

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Smallest tableau entry accepted as a pivot.
    pub pivot_tol: f64,
    /// Reduced-cost tolerance for optimality.
    pub opt_tol: f64,
    /// Phase-1 residual above which the model is declared infeasible.
    pub infeas_tol: f64,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
    /// `None` picks a limit from the model size.
    pub max_iterations: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { pivot_tol: 1e-9, opt_tol: 1e-9, infeas_tol: 1e-7, bland_after: 50, max_iterations: None }
    }
}

/// Solves the continuous relaxation of `model` (integrality is ignored).
pub fn solve_lp(model: &MathModel) -> Result<MathSolution, SolverError> {
    solve_lp_with(model, &SimplexOptions::default())
}

pub fn solve_lp_with(model: &MathModel, opts: &SimplexOptions) -> Result<MathSolution, SolverError> {
    model.check()?;
    let lower: Vec<f64> = model.variables.iter().map(|v| v.lower).collect();
    let upper: Vec<f64> = model.variables.iter().map(|v| v.upper).collect();
    solve_with_bounds(model, &lower, &upper, opts)
}

/// Entry point for branch-and-bound: the model's own bounds are replaced by
/// `lower`/`upper`. The model must already have passed [`MathModel::check`].
pub(crate) fn solve_with_bounds(
    model: &MathModel,
    lower: &[f64],
    upper: &[f64],
    opts: &SimplexOptions,
) -> Result<MathSolution, SolverError> {
    let n = model.num_vars();
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return Ok(MathSolution::infeasible());
    }
    let mut tab = Tableau::build(model, lower, upper);
    let limit = opts.max_iterations.unwrap_or(20_000 + 50 * (tab.m + tab.ncol));

    // Phase 1.
    if tab.num_art > 0 {
        let mut cost = vec![0.0; tab.ncol];
        for c in cost.iter_mut().skip(tab.art_start) {
            *c = 1.0;
        }
        tab.set_costs(cost);
        match tab.run(opts, limit)? {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded => return Err(SolverError::Numerical("phase 1 reported an unbounded ray".into())),
        }
        let residual: f64 = (0..tab.m)
            .filter(|&i| tab.basis[i] >= tab.art_start)
            .map(|i| tab.beta[i].max(0.0))
            .sum();
        if residual > opts.infeas_tol * (1.0 + tab.rhs_scale) {
            return Ok(MathSolution::infeasible());
        }
        tab.retire_artificials();
    }

    // Phase 2.
    let mut cost = vec![0.0; tab.ncol];
    for (v, a) in model.objective_dense().into_iter().enumerate() {
        cost[v] = a;
    }
    tab.set_costs(cost);
    match tab.run(opts, limit)? {
        PhaseEnd::Optimal => {}
        PhaseEnd::Unbounded => return Ok(MathSolution::unbounded()),
    }

    let mut row_of = vec![usize::MAX; tab.ncol];
    for (i, &b) in tab.basis.iter().enumerate() {
        row_of[b] = i;
    }
    let mut values = vec![0.0; n];
    for (j, val) in values.iter_mut().enumerate() {
        let shifted = tab.column_value(j, &row_of);
        let mut x = lower[j] + shifted;
        if x < lower[j] {
            x = lower[j];
        }
        if x > upper[j] {
            x = upper[j];
        }
        if x.abs() < 1e-11 {
            x = 0.0;
        }
        *val = x;
    }
    let objective = model.objective_value(&values);
    Ok(MathSolution { status: SolveStatus::Optimal, objective, values })
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Tableau {
    m: usize,
    ncol: usize,
    art_start: usize,
    num_art: usize,
    /// Row-major `m x ncol` matrix `B^-1 A`.
    t: Vec<f64>,
    /// Values of the basic variables (shifted space).
    beta: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    at_upper: Vec<bool>,
    /// Width of each column's box; `INFINITY` when unbounded above.
    range: Vec<f64>,
    cost: Vec<f64>,
    reduced: Vec<f64>,
    rhs_scale: f64,
    iterations: usize,
}

impl Tableau {
    fn build(model: &MathModel, lower: &[f64], upper: &[f64]) -> Self {
        let n = model.num_vars();
        let m = model.num_constraints();
        let num_slack = model.constraints.iter().filter(|c| c.relation != Relation::Eq).count();

        struct Row {
            coefs: Vec<(usize, f64)>,
            slack: Option<(usize, f64)>,
            rhs: f64,
        }
        let mut rows = Vec::with_capacity(m);
        let mut next_slack = n;
        for c in &model.constraints {
            let mut rhs = c.rhs;
            for &(v, a) in &c.terms {
                rhs -= a * lower[v.0];
            }
            let scale = c.terms.iter().fold(0.0f64, |acc, &(_, a)| acc.max(a.abs()));
            let scale = if scale > 0.0 { 1.0 / scale } else { 1.0 };
            let mut coefs: Vec<(usize, f64)> = c.terms.iter().map(|&(v, a)| (v.0, a * scale)).collect();
            rhs *= scale;
            let mut slack = match c.relation {
                Relation::Le => Some((next_slack, 1.0)),
                Relation::Ge => Some((next_slack, -1.0)),
                Relation::Eq => None,
            };
            if slack.is_some() {
                next_slack += 1;
            }
            if rhs < 0.0 {
                rhs = -rhs;
                for e in &mut coefs {
                    e.1 = -e.1;
                }
                if let Some(s) = &mut slack {
                    s.1 = -s.1;
                }
            }
            rows.push(Row { coefs, slack, rhs });
        }

        let art_start = n + num_slack;
        let num_art = rows.iter().filter(|r| !matches!(r.slack, Some((_, s)) if s > 0.0)).count();
        let ncol = art_start + num_art;

        let mut t = vec![0.0; m * ncol];
        let mut beta = vec![0.0; m];
        let mut basis = vec![0; m];
        let mut is_basic = vec![false; ncol];
        let mut range = vec![f64::INFINITY; ncol];
        for j in 0..n {
            range[j] = upper[j] - lower[j];
        }
        let mut next_art = art_start;
        let mut rhs_scale: f64 = 0.0;
        for (i, row) in rows.iter().enumerate() {
            let base = i * ncol;
            for &(j, a) in &row.coefs {
                t[base + j] += a;
            }
            beta[i] = row.rhs;
            rhs_scale = rhs_scale.max(row.rhs);
            match row.slack {
                Some((s, sign)) => {
                    t[base + s] = sign;
                    if sign > 0.0 {
                        basis[i] = s;
                    } else {
                        t[base + next_art] = 1.0;
                        basis[i] = next_art;
                        next_art += 1;
                    }
                }
                None => {
                    t[base + next_art] = 1.0;
                    basis[i] = next_art;
                    next_art += 1;
                }
            }
            is_basic[basis[i]] = true;
        }

        Tableau {
            m,
            ncol,
            art_start,
            num_art,
            t,
            beta,
            basis,
            is_basic,
            at_upper: vec![false; ncol],
            range,
            cost: vec![0.0; ncol],
            reduced: vec![0.0; ncol],
            rhs_scale,
            iterations: 0,
        }
    }

    fn set_costs(&mut self, cost: Vec<f64>) {
        let mut reduced = cost.clone();
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.t[i * self.ncol..(i + 1) * self.ncol];
            for (d, &a) in reduced.iter_mut().zip(row) {
                if a != 0.0 {
                    *d -= cb * a;
                }
            }
        }
        for i in 0..self.m {
            reduced[self.basis[i]] = 0.0;
        }
        self.cost = cost;
        self.reduced = reduced;
    }

    /// Fixes artificial columns at zero so they can never re-enter.
    fn retire_artificials(&mut self) {
        for j in self.art_start..self.ncol {
            self.range[j] = 0.0;
            self.at_upper[j] = false;
        }
        for i in 0..self.m {
            if self.basis[i] >= self.art_start && self.beta[i].abs() < 1e-6 {
                self.beta[i] = 0.0;
            }
        }
    }

    fn column_value(&self, j: usize, row_of: &[usize]) -> f64 {
        if self.is_basic[j] {
            self.beta[row_of[j]]
        } else if self.at_upper[j] {
            self.range[j]
        } else {
            0.0
        }
    }

    fn run(&mut self, opts: &SimplexOptions, limit: usize) -> Result<PhaseEnd, SolverError> {
        let mut bland = false;
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= limit {
                return Err(SolverError::IterationLimit(limit));
            }
            let Some((entering, dir)) = self.price(opts.opt_tol, bland) else {
                return Ok(PhaseEnd::Optimal);
            };
            self.iterations += 1;

            // Ratio test over basic rows.
            let mut best: Option<(usize, f64, bool)> = None; // (row, step, leaves at upper)
            let mut best_alpha = 0.0f64;
            for i in 0..self.m {
                let a = self.t[i * self.ncol + entering];
                if a.abs() <= opts.pivot_tol {
                    continue;
                }
                let alpha = dir * a;
                let (step, to_upper) = if alpha > 0.0 {
                    (self.beta[i].max(0.0) / alpha, false)
                } else {
                    let ub = self.range[self.basis[i]];
                    if !ub.is_finite() {
                        continue;
                    }
                    ((ub - self.beta[i]).max(0.0) / -alpha, true)
                };
                let take = match best {
                    None => true,
                    Some((bi, bstep, _)) => {
                        if step < bstep - 1e-12 {
                            true
                        } else if step <= bstep + 1e-12 {
                            if bland {
                                self.basis[i] < self.basis[bi]
                            } else {
                                alpha.abs() > best_alpha + 1e-12
                                    || ((alpha.abs() - best_alpha).abs() <= 1e-12 && self.basis[i] < self.basis[bi])
                            }
                        } else {
                            false
                        }
                    }
                };
                if take {
                    best = Some((i, step, to_upper));
                    best_alpha = alpha.abs();
                }
            }

            let own_range = self.range[entering];
            let row_step = best.map(|b| b.1).unwrap_or(f64::INFINITY);
            if own_range.is_finite() && own_range <= row_step {
                // Bound flip: the entering column crosses its whole box.
                for i in 0..self.m {
                    let a = self.t[i * self.ncol + entering];
                    if a != 0.0 {
                        self.beta[i] -= dir * own_range * a;
                    }
                }
                self.at_upper[entering] = dir > 0.0;
                degenerate_run = if own_range <= 1e-12 { degenerate_run + 1 } else { 0 };
            } else if let Some((r, step, to_upper)) = best {
                for i in 0..self.m {
                    let a = self.t[i * self.ncol + entering];
                    if a != 0.0 {
                        self.beta[i] -= dir * step * a;
                    }
                }
                let entering_value = if dir > 0.0 { step } else { own_range - step };
                let leaving = self.basis[r];
                self.is_basic[leaving] = false;
                self.at_upper[leaving] = to_upper;
                self.pivot(r, entering);
                self.beta[r] = entering_value;
                self.basis[r] = entering;
                self.is_basic[entering] = true;
                self.at_upper[entering] = false;
                degenerate_run = if step <= 1e-12 { degenerate_run + 1 } else { 0 };
            } else {
                return Ok(PhaseEnd::Unbounded);
            }
            if degenerate_run > opts.bland_after {
                bland = true;
            }
        }
    }

    /// Returns the entering column and its direction (+1 increase, -1 decrease).
    fn price(&self, tol: f64, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.ncol {
            if self.is_basic[j] || self.range[j] <= 0.0 {
                continue;
            }
            let d = self.reduced[j];
            let dir = if !self.at_upper[j] && d < -tol {
                1.0
            } else if self.at_upper[j] && d > tol {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if d.abs() > best_score {
                best_score = d.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let ncol = self.ncol;
        let p = self.t[r * ncol + e];
        let inv = 1.0 / p;
        let mut nz = Vec::new();
        {
            let row = &mut self.t[r * ncol..(r + 1) * ncol];
            for (k, v) in row.iter_mut().enumerate() {
                if *v != 0.0 {
                    *v *= inv;
                    nz.push(k);
                }
            }
            row[e] = 1.0;
        }
        let pivot_row: Vec<(usize, f64)> = nz.iter().map(|&k| (k, self.t[r * ncol + k])).collect();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * ncol + e];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * ncol..(i + 1) * ncol];
            for &(k, a) in &pivot_row {
                let v = row[k] - f * a;
                row[k] = if v.abs() < 1e-13 { 0.0 } else { v };
            }
            row[e] = 0.0;
        }
        let f = self.reduced[e];
        if f != 0.0 {
            for &(k, a) in &pivot_row {
                let v = self.reduced[k] - f * a;
                self.reduced[k] = if v.abs() < 1e-13 { 0.0 } else { v };
            }
        }
        self.reduced[e] = 0.0;
    }
}
