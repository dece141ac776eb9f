//! MPS writer.
//!
//! Layout: free-format MPS with fixed column alignment. Sections appear in the
//! order NAME, ROWS, COLUMNS, RHS, RANGES, BOUNDS, ENDATA. The objective row is
//! named `obj` and listed first. Integer and binary columns are wrapped in
//! `MARKER INTORG`/`INTEND` blocks and always carry explicit bounds, so no
//! reader falls back on an implicit `[0, 1]` or `[0, inf)` convention.
//! Every column appears in COLUMNS even if it has no nonzero, through an
//! explicit `obj 0` entry. Numbers use the shortest round-trip decimal form,
//! which makes the output a pure function of the model.

use std::fmt::Write;

use crate::milp::{Domain, MilpModel, Sense};

pub const MAX_NAME_LEN: usize = 255;

fn num(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

fn entry(out: &mut String, field1: &str, field2: &str, field3: &str) {
    let _ = writeln!(out, "    {field1:<24} {field2:<24} {field3}");
}

/// Serialize `model` to MPS. Panics if a name is blank, contains whitespace
/// or is longer than [`MAX_NAME_LEN`]; the builder never produces such names.
pub fn export_mps(model: &MilpModel) -> Vec<u8> {
    for n in model
        .variables
        .iter()
        .map(|v| v.name.as_str())
        .chain(model.constraints.iter().map(|c| c.name.as_str()))
    {
        assert!(
            !n.is_empty() && n.len() <= MAX_NAME_LEN && !n.chars().any(char::is_whitespace),
            "unexportable name {n:?}"
        );
    }

    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.variables.len()];
    for (r, c) in model.constraints.iter().enumerate() {
        for &(v, k) in &c.terms {
            cols[v.0].push((r, k));
        }
    }
    let mut obj = vec![0.0; model.variables.len()];
    for &(v, k) in &model.objective {
        obj[v.0] += k;
    }

    let mut out = String::new();
    let name = if model.name.is_empty() || model.name.chars().any(char::is_whitespace) {
        "model".to_string()
    } else {
        model.name.clone()
    };
    let _ = writeln!(out, "NAME          {name}");
    out.push_str("ROWS\n N  obj\n");
    for c in &model.constraints {
        let s = match c.sense {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        };
        let _ = writeln!(out, " {s}  {}", c.name);
    }

    out.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut markers = 0;
    for (j, var) in model.variables.iter().enumerate() {
        let int = var.domain.is_integral();
        if int != in_int {
            let kind = if int { "'INTORG'" } else { "'INTEND'" };
            entry(&mut out, &format!("MARKER{markers:04}"), "'MARKER'", kind);
            markers += 1;
            in_int = int;
        }
        if obj[j] != 0.0 || cols[j].is_empty() {
            entry(&mut out, &var.name, "obj", &num(obj[j]));
        }
        for &(r, k) in &cols[j] {
            entry(&mut out, &var.name, &model.constraints[r].name, &num(k));
        }
    }
    if in_int {
        entry(&mut out, &format!("MARKER{markers:04}"), "'MARKER'", "'INTEND'");
    }

    out.push_str("RHS\n");
    if model.objective_constant != 0.0 {
        entry(&mut out, "rhs", "obj", &num(-model.objective_constant));
    }
    for c in &model.constraints {
        if c.rhs != 0.0 {
            entry(&mut out, "rhs", &c.name, &num(c.rhs));
        }
    }
    out.push_str("RANGES\n");

    out.push_str("BOUNDS\n");
    for var in &model.variables {
        let (lo, hi) = var.domain.bounds();
        let line = |kind: &str, v: Option<f64>| match v {
            Some(v) => format!(" {kind} bnd       {:<24} {}\n", var.name, num(v)),
            None => format!(" {kind} bnd       {}\n", var.name),
        };
        if lo == hi {
            out.push_str(&line("FX", Some(lo)));
            continue;
        }
        match var.domain {
            Domain::Binary | Domain::Integer { .. } => {
                if lo != 0.0 {
                    out.push_str(&line("LO", Some(lo)));
                }
                if hi.is_finite() {
                    out.push_str(&line("UP", Some(hi)));
                } else {
                    out.push_str(&line("PL", None));
                }
            }
            Domain::Continuous { .. } => {
                if lo != 0.0 {
                    out.push_str(&line("LO", Some(lo)));
                }
                if hi.is_finite() {
                    out.push_str(&line("UP", Some(hi)));
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    out.into_bytes()
}
