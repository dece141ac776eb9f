//! Solution file readers and writer.
//!
//! Native format, one entry per line:
//!
//! ```text
//! # comment
//! @status optimal          optional: optimal|feasible|infeasible|timelimit|error
//! @objective 805300        optional, checked against the recomputed value
//! @bound 805300            optional
//! y(I6,A) 1
//! ```
//!
//! Variables not listed are 0. Unknown names and repeated names are errors.

use std::collections::HashSet;
use std::fmt::Write;

use crate::error::SolverError;
use crate::milp::MilpModel;

use super::{Solution, SolveStatus};

fn number(line: usize, s: &str) -> Result<f64, SolverError> {
    let v: f64 = s
        .parse()
        .map_err(|_| SolverError::parse(line, format!("invalid number `{s}`")))?;
    if !v.is_finite() {
        return Err(SolverError::parse(line, format!("non-finite number `{s}`")));
    }
    Ok(v)
}

/// Parse the native name/value format. Without an `@status` line the status
/// is `Optimal`.
pub fn parse_solution(model: &MilpModel, text: &str) -> Result<Solution, SolverError> {
    let mut values = vec![0.0; model.variables.len()];
    let mut seen = HashSet::new();
    let mut status = SolveStatus::Optimal;
    let (mut objective, mut bound) = (None, None);
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut parts = body.split_whitespace();
        let (name, value) = match (parts.next(), parts.next(), parts.next()) {
            (Some(n), Some(v), None) => (n, v),
            _ => return Err(SolverError::parse(line, format!("expected `name value`, got `{body}`"))),
        };
        match name {
            "@status" => status = value.parse().map_err(|e: String| SolverError::parse(line, e))?,
            "@objective" => objective = Some(number(line, value)?),
            "@bound" => bound = Some(number(line, value)?),
            _ => {
                let id = model
                    .var_by_name(name)
                    .ok_or_else(|| SolverError::parse(line, format!("unknown variable `{name}`")))?;
                if !seen.insert(id) {
                    return Err(SolverError::parse(line, format!("variable `{name}` listed twice")));
                }
                values[id.0] = number(line, value)?;
            }
        }
    }
    Ok(Solution {
        status,
        objective,
        bound,
        gap: None,
        defaulted: model.variables.len() - seen.len(),
        values,
    })
}

/// Write a solution in the native format. With `dense` every variable is
/// listed; otherwise zeros are omitted.
pub fn write_solution(model: &MilpModel, sol: &Solution, dense: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "@status {}", sol.status);
    if let Some(o) = sol.objective {
        let _ = writeln!(out, "@objective {o}");
    }
    if let Some(b) = sol.bound {
        let _ = writeln!(out, "@bound {b}");
    }
    for (v, &x) in model.variables.iter().zip(&sol.values) {
        if dense || x != 0.0 {
            let _ = writeln!(out, "{} {x}", v.name);
        }
    }
    out
}

/// Parse the solution file CBC writes with `solu`. The first line carries
/// the status and objective; each further line is
/// `index name value reduced-cost`, optionally prefixed by `**` when the
/// value is infeasible.
pub fn parse_cbc_solution(model: &MilpModel, text: &str) -> Result<Solution, SolverError> {
    let mut lines = text.lines().enumerate();
    let (_, head) = lines
        .next()
        .ok_or_else(|| SolverError::parse(1, "empty CBC solution file"))?;
    let lower = head.to_ascii_lowercase();
    let status = if lower.starts_with("optimal") {
        SolveStatus::Optimal
    } else if lower.contains("infeasible") {
        SolveStatus::Infeasible
    } else if lower.contains("no integer solution") {
        SolveStatus::TimeLimitNoIncumbent
    } else if lower.starts_with("stopped") {
        SolveStatus::FeasibleWithinGap
    } else {
        SolveStatus::Error
    };
    let objective = head
        .rsplit("objective value")
        .next()
        .filter(|_| lower.contains("objective value"))
        .and_then(|s| s.trim().parse::<f64>().ok());

    let mut values = vec![0.0; model.variables.len()];
    let mut seen = HashSet::new();
    for (k, raw) in lines {
        let line = k + 1;
        let body = raw.trim().trim_start_matches("**").trim();
        if body.is_empty() {
            continue;
        }
        let f: Vec<&str> = body.split_whitespace().collect();
        if f.len() < 3 {
            return Err(SolverError::parse(line, format!("malformed CBC line `{body}`")));
        }
        let name = f[1];
        let id = model
            .var_by_name(name)
            .ok_or_else(|| SolverError::parse(line, format!("unknown variable `{name}`")))?;
        seen.insert(id);
        values[id.0] = number(line, f[2])?;
    }
    Ok(Solution {
        status,
        objective,
        bound: if status == SolveStatus::Optimal { objective } else { None },
        gap: None,
        defaulted: model.variables.len() - seen.len(),
        values,
    })
}
