//! Solver-agnostic MILP intermediate representation.

mod builder;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;

pub use builder::{add_grid_restriction, build, build_with, set_backorder_cost, BuildLimits};

/// Identity of one model variable. Batch, line, product and depot fields are
/// 0-based indices into the instance; `slot`/`state` are time indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarRef {
    /// `y`: batch carries product.
    Assign { batch: usize, product: usize },
    /// `w`: input node of `line` enlarges batch during slot.
    Inject { batch: usize, line: usize, slot: usize },
    /// `x`: depot receives from batch during slot.
    Receive { batch: usize, depot: usize, slot: usize },
    /// `u`: batch moves from `line - 1` into `line` during slot.
    Move { batch: usize, line: usize, slot: usize },
    /// `F`: upper coordinate of batch within line.
    Coord { batch: usize, line: usize, state: usize },
    /// `W`: volume of batch within line.
    Volume { batch: usize, line: usize, state: usize },
    /// `R`: volume injected into batch at the head of line.
    Injected { batch: usize, line: usize, slot: usize },
    /// `RP`: injected volume by product.
    InjectedProduct { batch: usize, product: usize, line: usize, slot: usize },
    /// `D`: volume delivered from batch to depot.
    Delivered { batch: usize, depot: usize, slot: usize },
    /// `DP`: delivered volume by product.
    DeliveredProduct { batch: usize, product: usize, depot: usize, slot: usize },
    /// `S`: volume of batch moved from `line - 1` into `line`.
    Transferred { batch: usize, line: usize, slot: usize },
    /// `Border`: unmet demand of product at depot.
    Backorder { product: usize, depot: usize },
    /// `IC`: interface cost between batch and its predecessor.
    InterfaceCost { batch: usize },
    /// Integer multiplier pinning `R` to a volume grid.
    GridInjected { batch: usize, line: usize, slot: usize },
    /// Integer multiplier pinning `D` to a volume grid.
    GridDelivered { batch: usize, depot: usize, slot: usize },
    /// Integer multiplier pinning `S` to a volume grid.
    GridTransferred { batch: usize, line: usize, slot: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum VarKind {
    #[serde(rename = "y")]
    Y,
    #[serde(rename = "w")]
    W,
    #[serde(rename = "x")]
    X,
    #[serde(rename = "u")]
    U,
    #[serde(rename = "F")]
    F,
    #[serde(rename = "W")]
    Vol,
    #[serde(rename = "R")]
    R,
    #[serde(rename = "RP")]
    Rp,
    #[serde(rename = "D")]
    D,
    #[serde(rename = "DP")]
    Dp,
    #[serde(rename = "S")]
    S,
    #[serde(rename = "Border")]
    Border,
    #[serde(rename = "IC")]
    Ic,
    #[serde(rename = "grid")]
    Grid,
}

impl VarKind {
    pub fn symbol(self) -> &'static str {
        match self {
            VarKind::Y => "y",
            VarKind::W => "w",
            VarKind::X => "x",
            VarKind::U => "u",
            VarKind::F => "F",
            VarKind::Vol => "W",
            VarKind::R => "R",
            VarKind::Rp => "RP",
            VarKind::D => "D",
            VarKind::Dp => "DP",
            VarKind::S => "S",
            VarKind::Border => "Border",
            VarKind::Ic => "IC",
            VarKind::Grid => "grid",
        }
    }
}

impl VarRef {
    pub fn kind(&self) -> VarKind {
        match self {
            VarRef::Assign { .. } => VarKind::Y,
            VarRef::Inject { .. } => VarKind::W,
            VarRef::Receive { .. } => VarKind::X,
            VarRef::Move { .. } => VarKind::U,
            VarRef::Coord { .. } => VarKind::F,
            VarRef::Volume { .. } => VarKind::Vol,
            VarRef::Injected { .. } => VarKind::R,
            VarRef::InjectedProduct { .. } => VarKind::Rp,
            VarRef::Delivered { .. } => VarKind::D,
            VarRef::DeliveredProduct { .. } => VarKind::Dp,
            VarRef::Transferred { .. } => VarKind::S,
            VarRef::Backorder { .. } => VarKind::Border,
            VarRef::InterfaceCost { .. } => VarKind::Ic,
            VarRef::GridInjected { .. } | VarRef::GridDelivered { .. } | VarRef::GridTransferred { .. } => {
                VarKind::Grid
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Binary,
    Integer { lo: f64, hi: f64 },
    Continuous { lo: f64, hi: f64 },
}

impl Domain {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Domain::Binary => (0.0, 1.0),
            Domain::Integer { lo, hi } | Domain::Continuous { lo, hi } => (lo, hi),
        }
    }

    pub fn is_integral(&self) -> bool {
        !matches!(self, Domain::Continuous { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub key: VarRef,
    pub name: String,
    pub domain: Domain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinConstraint {
    pub name: String,
    /// Constraint family, e.g. `eq17` or `grid`.
    pub family: &'static str,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinConstraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Amount by which `values` violates the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let a = self.activity(values);
        match self.sense {
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelStats {
    pub variables: usize,
    pub binaries: usize,
    pub integers: usize,
    pub continuous: usize,
    pub constraints: usize,
    pub nonzeros: usize,
    pub variables_by_kind: BTreeMap<String, usize>,
    pub constraints_by_family: BTreeMap<String, usize>,
}

impl fmt::Display for ModelStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "variables {} (binary {}, integer {}, continuous {})",
            self.variables, self.binaries, self.integers, self.continuous
        )?;
        writeln!(f, "constraints {}", self.constraints)?;
        writeln!(f, "nonzeros {}", self.nonzeros)?;
        for (k, n) in &self.variables_by_kind {
            writeln!(f, "  var {k:<8} {n}")?;
        }
        for (k, n) in &self.constraints_by_family {
            writeln!(f, "  row {k:<8} {n}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub name: String,
    pub variables: Vec<Variable>,
    pub constraints: Vec<LinConstraint>,
    /// Minimized.
    pub objective: Vec<(VarId, f64)>,
    pub objective_constant: f64,
    index: HashMap<VarRef, VarId>,
    names: HashMap<String, VarId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowViolation {
    pub row: String,
    pub amount: f64,
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
            objective_constant: 0.0,
            index: HashMap::new(),
            names: HashMap::new(),
        }
    }

    /// Declare a variable. Panics on a repeated key or name, which would be a
    /// builder bug.
    pub fn add_var(&mut self, key: VarRef, name: String, domain: Domain) -> VarId {
        let (lo, hi) = domain.bounds();
        assert!(lo <= hi && lo >= 0.0, "bad bounds for {name}: [{lo}, {hi}]");
        let id = VarId(self.variables.len());
        assert!(self.index.insert(key, id).is_none(), "duplicate variable {key:?}");
        assert!(self.names.insert(name.clone(), id).is_none(), "duplicate variable name {name}");
        self.variables.push(Variable { key, name, domain });
        id
    }

    pub fn add_constraint(&mut self, c: LinConstraint) {
        debug_assert!(c.terms.iter().all(|(_, k)| k.is_finite()), "non-finite coefficient in {}", c.name);
        self.constraints.push(c);
    }

    pub fn var(&self, key: &VarRef) -> Option<VarId> {
        self.index.get(key).copied()
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.names.get(name).copied()
    }

    pub fn value(&self, values: &[f64], key: &VarRef) -> f64 {
        self.var(key).map_or(0.0, |v| values[v.0])
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().map(|&(v, c)| c * values[v.0]).sum::<f64>()
    }

    /// Rows violated by more than `tol`, plus bound and integrality breaches.
    pub fn violations(&self, values: &[f64], tol: f64) -> Vec<RowViolation> {
        let mut out = Vec::new();
        for (var, &x) in self.variables.iter().zip(values) {
            let (lo, hi) = var.domain.bounds();
            if x < lo - tol || x > hi + tol {
                out.push(RowViolation {
                    row: format!("bounds:{}", var.name),
                    amount: (lo - x).max(x - hi),
                });
            }
            if var.domain.is_integral() && (x - x.round()).abs() > tol {
                out.push(RowViolation {
                    row: format!("integrality:{}", var.name),
                    amount: (x - x.round()).abs(),
                });
            }
        }
        for c in &self.constraints {
            let v = c.violation(values);
            if v > tol {
                out.push(RowViolation {
                    row: c.name.clone(),
                    amount: v,
                });
            }
        }
        out
    }

    pub fn stats(&self) -> ModelStats {
        let mut by_kind = BTreeMap::new();
        let (mut bin, mut int) = (0, 0);
        for v in &self.variables {
            *by_kind.entry(v.key.kind().symbol().to_string()).or_insert(0) += 1;
            match v.domain {
                Domain::Binary => bin += 1,
                Domain::Integer { .. } => int += 1,
                Domain::Continuous { .. } => {}
            }
        }
        let mut by_family = BTreeMap::new();
        for c in &self.constraints {
            *by_family.entry(c.family.to_string()).or_insert(0) += 1;
        }
        ModelStats {
            variables: self.variables.len(),
            binaries: bin,
            integers: int,
            continuous: self.variables.len() - bin - int,
            constraints: self.constraints.len(),
            nonzeros: self.constraints.iter().map(|c| c.terms.len()).sum(),
            variables_by_kind: by_kind,
            constraints_by_family: by_family,
        }
    }
}
