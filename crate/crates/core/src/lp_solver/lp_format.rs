//! CPLEX LP text format: `Minimize`, `Subject To`, `Bounds`, `General`, `End`.
//!
//! Every variable gets an explicit line in `Bounds`, in model order, so a
//! written model parses back with the same variable indexing. Coefficients
//! use Rust's shortest round-trip float formatting.

use super::{MathModel, Relation, SolverError, VarId, VarKind};
use std::collections::HashMap;
use std::fmt::Write;

pub fn export_model(model: &MathModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ Problem: {}", model.name);
    let _ = writeln!(out, "Minimize");
    let mut obj = model.objective.clone();
    obj.sort_by_key(|t| t.0);
    let obj = super::merge_terms(obj);
    if obj.is_empty() && !model.variables.is_empty() {
        let _ = writeln!(out, " obj: 0 {}", model.variables[0].name);
    } else {
        let _ = writeln!(out, " obj: {}", linear_expr(model, &obj));
    }
    let _ = writeln!(out, "Subject To");
    for c in &model.constraints {
        let expr = if c.terms.is_empty() {
            format!("0 {}", model.variables[0].name)
        } else {
            linear_expr(model, &c.terms)
        };
        let _ = writeln!(out, " {}: {} {} {}", c.name, expr, c.relation, c.rhs);
    }
    let _ = writeln!(out, "Bounds");
    for v in &model.variables {
        if v.upper.is_infinite() {
            let _ = writeln!(out, " {} >= {}", v.name, v.lower);
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", v.lower, v.name, v.upper);
        }
    }
    let ints: Vec<&str> =
        model.variables.iter().filter(|v| v.kind == VarKind::Integer).map(|v| v.name.as_str()).collect();
    if !ints.is_empty() {
        let _ = writeln!(out, "General");
        for chunk in ints.chunks(8) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    let _ = writeln!(out, "End");
    out
}

fn linear_expr(model: &MathModel, terms: &[(VarId, f64)]) -> String {
    let mut s = String::new();
    for (i, &(v, a)) in terms.iter().enumerate() {
        let name = &model.variables[v.0].name;
        if i == 0 {
            let _ = write!(s, "{a} {name}");
        } else if a < 0.0 {
            let _ = write!(s, " - {} {name}", -a);
        } else {
            let _ = write!(s, " + {a} {name}");
        }
    }
    s
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Objective,
    Constraints,
    Bounds,
    General,
    Done,
}

/// Parses the subset of the LP format produced by [`export_model`]
/// (multi-line rows and a few section synonyms are accepted).
pub fn parse_model(text: &str) -> Result<MathModel, SolverError> {
    let mut name = String::new();
    let mut section = Section::None;
    let mut objective: Vec<(String, f64)> = Vec::new();
    let mut rows: Vec<(String, Vec<(String, f64)>, Relation, f64)> = Vec::new();
    let mut bounds: Vec<(String, f64, f64)> = Vec::new();
    let mut integers: Vec<String> = Vec::new();
    let mut pending = String::new();
    let mut pending_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('\\') {
            if let Some(n) = rest.trim().strip_prefix("Problem:") {
                name = n.trim().to_string();
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let lower = line.to_ascii_lowercase();
        let next = match lower.as_str() {
            "minimize" | "minimum" | "min" => Some(Section::Objective),
            "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
            "bounds" | "bound" => Some(Section::Bounds),
            "general" | "generals" | "gen" | "integer" | "integers" => Some(Section::General),
            "end" => Some(Section::Done),
            "maximize" | "maximum" | "max" => {
                return Err(SolverError::Parse { line: line_no, message: "only minimization is supported".into() })
            }
            _ => None,
        };
        if let Some(next) = next {
            if !pending.is_empty() {
                return Err(SolverError::Parse { line: pending_line, message: "unterminated row".into() });
            }
            section = next;
            continue;
        }
        match section {
            Section::None | Section::Done => {
                return Err(SolverError::Parse { line: line_no, message: format!("unexpected text `{line}`") })
            }
            Section::Objective => {
                let body = line.split_once(':').map(|(_, b)| b).unwrap_or(line);
                objective.extend(parse_terms(body, line_no)?);
            }
            Section::Constraints => {
                if pending.is_empty() {
                    pending_line = line_no;
                }
                pending.push(' ');
                pending.push_str(line);
                if let Some(row) = try_parse_row(&pending, pending_line)? {
                    rows.push(row);
                    pending.clear();
                }
            }
            Section::Bounds => bounds.push(parse_bound(line, line_no)?),
            Section::General => integers.extend(line.split_whitespace().map(str::to_string)),
        }
    }
    if !pending.is_empty() {
        return Err(SolverError::Parse { line: pending_line, message: "unterminated row".into() });
    }

    let mut model = MathModel::new(name);
    let mut index: HashMap<String, VarId> = HashMap::new();
    for (n, lo, hi) in &bounds {
        match index.get(n) {
            Some(&v) => {
                let var = &mut model.variables[v.0];
                var.lower = var.lower.max(*lo);
                var.upper = var.upper.min(*hi);
            }
            None => {
                let v = model.add_continuous(n.clone(), *lo, *hi);
                index.insert(n.clone(), v);
            }
        }
    }
    let mut lookup = |model: &mut MathModel, n: &str| -> VarId {
        *index.entry(n.to_string()).or_insert_with(|| model.add_continuous(n, 0.0, f64::INFINITY))
    };
    for (n, a) in objective {
        let v = lookup(&mut model, &n);
        model.add_objective_term(v, a);
    }
    for (row_name, terms, rel, rhs) in rows {
        let terms = terms.into_iter().map(|(n, a)| (lookup(&mut model, &n), a)).collect();
        model.add_constraint(row_name, terms, rel, rhs);
    }
    for n in integers {
        let v = lookup(&mut model, &n);
        model.variables[v.0].kind = VarKind::Integer;
    }
    model.objective = super::merge_terms(std::mem::take(&mut model.objective));
    Ok(model)
}

fn parse_number(tok: &str) -> Option<f64> {
    match tok.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Some(f64::INFINITY),
        "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
        _ => tok.parse::<f64>().ok(),
    }
}

fn parse_terms(body: &str, line: usize) -> Result<Vec<(String, f64)>, SolverError> {
    let mut terms = Vec::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for tok in body.split_whitespace() {
        match tok {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            _ => {
                if let Some(x) = parse_number(tok) {
                    coef = Some(coef.unwrap_or(1.0) * x);
                } else {
                    terms.push((tok.to_string(), sign * coef.unwrap_or(1.0)));
                    sign = 1.0;
                    coef = None;
                }
            }
        }
    }
    if coef.is_some() {
        return Err(SolverError::Parse { line, message: "dangling coefficient".into() });
    }
    Ok(terms)
}

type Row = (String, Vec<(String, f64)>, Relation, f64);

fn try_parse_row(text: &str, line: usize) -> Result<Option<Row>, SolverError> {
    let (name, body) = match text.split_once(':') {
        Some((n, b)) => (n.trim().to_string(), b),
        None => (String::new(), text),
    };
    let ops = [("<=", Relation::Le), (">=", Relation::Ge), ("=<", Relation::Le), ("=>", Relation::Ge), ("=", Relation::Eq)];
    for (op, rel) in ops {
        if let Some((lhs, rhs)) = body.split_once(op) {
            let rhs = rhs.trim();
            if rhs.is_empty() {
                return Ok(None);
            }
            let value = parse_number(rhs)
                .ok_or_else(|| SolverError::Parse { line, message: format!("bad right-hand side `{rhs}`") })?;
            return Ok(Some((name, parse_terms(lhs, line)?, rel, value)));
        }
    }
    Ok(None)
}

fn parse_bound(line: &str, line_no: usize) -> Result<(String, f64, f64), SolverError> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    let err = || SolverError::Parse { line: line_no, message: format!("bad bound `{line}`") };
    let num = |s: &str| parse_number(s).ok_or_else(err);
    match toks.as_slice() {
        [lo, "<=", name, "<=", hi] => Ok((name.to_string(), num(lo)?, num(hi)?)),
        [name, ">=", lo] => Ok((name.to_string(), num(lo)?, f64::INFINITY)),
        [name, "<=", hi] => Ok((name.to_string(), 0.0, num(hi)?)),
        [name, "=", v] => {
            let v = num(v)?;
            Ok((name.to_string(), v, v))
        }
        [name, free] if free.eq_ignore_ascii_case("free") => Ok((name.to_string(), f64::NEG_INFINITY, f64::INFINITY)),
        _ => Err(err()),
    }
}
