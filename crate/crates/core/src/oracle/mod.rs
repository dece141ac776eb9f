//! Independent schedule verification: plan format, forward simulation, rule
//! checks and a brute-force optimizer for tiny instances.
//!
//! Nothing here reads the MILP. Rules are restated as direct arithmetic on
//! batch volumes and coordinates so the two layers can cross-check each other.

mod brute;
mod check;
mod lift;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::PlanError;
use crate::instance::PipelineInstance;

pub use brute::{brute_force_optimize, BruteForceResult, SearchLimits};
pub use check::{check, plan_cost, simulate, surplus_pumped, PlanCost, Trajectory, Violation, ViolationReport};
pub use lift::lift_plan;
pub(crate) use check::batch_products;

/// A schedule expressed as slot-level operating decisions.
///
/// Labels are 1-based: input nodes `L1`, batches `I1`, depots `L2D1` (first
/// depot of line 2), line boundaries by the receiving line `L2`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingPlan {
    #[serde(default)]
    pub slots: Vec<SlotPlan>,
    /// Products of batches that receive none through injections, e.g. a
    /// reserved linefill slot. Keyed by batch label.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub assignments: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotPlan {
    pub slot: usize,
    #[serde(default)]
    pub injections: Vec<Injection>,
    #[serde(default)]
    pub deliveries: Vec<Delivery>,
    #[serde(default)]
    pub transfers: Vec<Transfer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Injection {
    pub node: String,
    pub batch: String,
    pub product: String,
    pub volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Delivery {
    pub depot: String,
    pub batch: String,
    pub volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transfer {
    pub batch: String,
    pub into: String,
    pub volume: f64,
}

impl OperatingPlan {
    pub fn from_json(bytes: &[u8]) -> Result<Self, PlanError> {
        serde_json::from_slice(bytes).map_err(PlanError::Parse)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plan serializes");
        s.push('\n');
        s
    }
}

/// Index-resolved form of a plan. Slot `t` lives at `slots[t - 1]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResolvedPlan {
    pub slots: Vec<ResolvedSlot>,
    pub assignments: Vec<Option<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResolvedSlot {
    /// (line, batch, product, volume)
    pub injections: Vec<(usize, usize, usize, f64)>,
    /// (depot, batch, volume)
    pub deliveries: Vec<(usize, usize, f64)>,
    /// (receiving line, batch, volume)
    pub transfers: Vec<(usize, usize, f64)>,
}

impl ResolvedSlot {
    pub fn is_empty(&self) -> bool {
        self.injections.is_empty() && self.deliveries.is_empty() && self.transfers.is_empty()
    }
}

fn label_index(label: &str, prefix: char, count: usize, what: &str) -> Result<usize, PlanError> {
    label
        .strip_prefix(prefix)
        .and_then(|n| n.parse::<usize>().ok())
        .filter(|&n| n >= 1 && n <= count)
        .map(|n| n - 1)
        .ok_or_else(|| PlanError::Index(format!("{what} `{label}` does not exist")))
}

impl PipelineInstance {
    pub fn batch_label(&self, batch: usize) -> String {
        format!("I{}", batch + 1)
    }
}

/// Resolve labels against `inst`. Fails on any label or slot the instance
/// does not have; operational rules are left to [`check`].
pub fn resolve(inst: &PipelineInstance, plan: &OperatingPlan) -> Result<ResolvedPlan, PlanError> {
    let ops = inst.time_grid.operational_slots();
    let nb = inst.batch_count();
    let nl = inst.lines.len();
    let product = |id: &str| {
        inst.product_index(id)
            .ok_or_else(|| PlanError::Index(format!("product `{id}` does not exist")))
    };
    let mut out = ResolvedPlan {
        slots: vec![ResolvedSlot::default(); ops],
        assignments: vec![None; nb],
    };
    for s in &plan.slots {
        if s.slot == 0 || s.slot > ops {
            return Err(PlanError::Index(format!("slot {} outside 1..={ops}", s.slot)));
        }
        let slot = &mut out.slots[s.slot - 1];
        for e in &s.injections {
            let line = label_index(&e.node, 'L', nl, "input node")?;
            if inst.input_node_of_line(line).is_none() {
                return Err(PlanError::Index(format!("line {} has no input node", e.node)));
            }
            let batch = label_index(&e.batch, 'I', nb, "batch")?;
            slot.injections.push((line, batch, product(&e.product)?, e.volume));
        }
        for e in &s.deliveries {
            let depot = inst
                .depot_by_tag(&e.depot)
                .ok_or_else(|| PlanError::Index(format!("depot `{}` does not exist", e.depot)))?;
            let batch = label_index(&e.batch, 'I', nb, "batch")?;
            slot.deliveries.push((depot, batch, e.volume));
        }
        for e in &s.transfers {
            let line = label_index(&e.into, 'L', nl, "line")?;
            if line == 0 {
                return Err(PlanError::Index("no line boundary upstream of L1".into()));
            }
            let batch = label_index(&e.batch, 'I', nb, "batch")?;
            slot.transfers.push((line, batch, e.volume));
        }
    }
    for (b, p) in &plan.assignments {
        let batch = label_index(b, 'I', nb, "batch")?;
        out.assignments[batch] = Some(product(p)?);
    }
    Ok(out)
}

/// Inverse of [`resolve`]: labels from indices, empty slots omitted.
pub fn unresolve(inst: &PipelineInstance, plan: &ResolvedPlan) -> OperatingPlan {
    let mut out = OperatingPlan::default();
    for (k, s) in plan.slots.iter().enumerate() {
        if s.is_empty() {
            continue;
        }
        out.slots.push(SlotPlan {
            slot: k + 1,
            injections: s
                .injections
                .iter()
                .map(|&(l, i, p, v)| Injection {
                    node: format!("L{}", l + 1),
                    batch: inst.batch_label(i),
                    product: inst.products[p].id.clone(),
                    volume: v,
                })
                .collect(),
            deliveries: s
                .deliveries
                .iter()
                .map(|&(d, i, v)| Delivery {
                    depot: inst.depot_tag(d),
                    batch: inst.batch_label(i),
                    volume: v,
                })
                .collect(),
            transfers: s
                .transfers
                .iter()
                .map(|&(l, i, v)| Transfer {
                    batch: inst.batch_label(i),
                    into: format!("L{}", l + 1),
                    volume: v,
                })
                .collect(),
        });
    }
    for (i, p) in plan.assignments.iter().enumerate() {
        if let Some(p) = p {
            out.assignments.insert(inst.batch_label(i), inst.products[*p].id.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{builtin_instance, BuiltinName};

    #[test]
    fn labels_resolve_and_round_trip() {
        let inst = builtin_instance(BuiltinName::Motivating);
        let json = r#"{"slots":[{"slot":2,
            "injections":[{"node":"L2","batch":"I1","product":"P1","volume":5}],
            "deliveries":[{"depot":"L2D2","batch":"I1","volume":5}],
            "transfers":[{"batch":"I2","into":"L2","volume":0.5}]}]}"#;
        let plan = OperatingPlan::from_json(json.as_bytes()).unwrap();
        let r = resolve(&inst, &plan).unwrap();
        assert!(r.slots[0].is_empty());
        assert_eq!(r.slots[1].injections, vec![(1, 0, 0, 5.0)]);
        assert_eq!(r.slots[1].deliveries, vec![(2, 0, 5.0)]);
        assert_eq!(r.slots[1].transfers, vec![(1, 1, 0.5)]);
        assert_eq!(unresolve(&inst, &r), plan);
    }

    #[test]
    fn out_of_range_labels_rejected() {
        let inst = builtin_instance(BuiltinName::Motivating);
        for bad in [
            r#"{"slots":[{"slot":3}]}"#,
            r#"{"slots":[{"slot":1,"deliveries":[{"depot":"L3D1","batch":"I1","volume":5}]}]}"#,
            r#"{"slots":[{"slot":1,"deliveries":[{"depot":"L1D1","batch":"I9","volume":5}]}]}"#,
            r#"{"slots":[{"slot":1,"injections":[{"node":"L1","batch":"I3","product":"P7","volume":5}]}]}"#,
            r#"{"slots":[{"slot":1,"transfers":[{"batch":"I1","into":"L1","volume":5}]}]}"#,
        ] {
            let plan = OperatingPlan::from_json(bad.as_bytes()).unwrap();
            assert!(matches!(resolve(&inst, &plan), Err(PlanError::Index(_))), "{bad}");
        }
        assert!(matches!(OperatingPlan::from_json(b"{\"slot\":[]}"), Err(PlanError::Parse(_))));
    }
}
