//! The three reference instances shipped with the engine.
//!
//! Tabulated data (supplies, demands, interface and pumping costs, slot
//! lengths, injection and delivery bounds) is copied verbatim. Geometry that
//! the reference material only shows graphically (line volumes, depot
//! offsets, the initial linefill) is reconstructed from the published
//! schedule narratives; see the README for the derivation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::instance::{
    coordinates_from_volumes, InputNode, Line, ModelOptions, OldBatch, OutputNode, PipelineInstance, Product,
    TimeGrid,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuiltinName {
    Motivating,
    Example1,
    Example2,
}

impl BuiltinName {
    pub const ALL: [BuiltinName; 3] = [BuiltinName::Motivating, BuiltinName::Example1, BuiltinName::Example2];

    pub fn as_str(self) -> &'static str {
        match self {
            BuiltinName::Motivating => "motivating",
            BuiltinName::Example1 => "example1",
            BuiltinName::Example2 => "example2",
        }
    }
}

impl fmt::Display for BuiltinName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BuiltinName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| format!("unknown builtin instance `{s}` (expected motivating, example1 or example2)"))
    }
}

pub fn builtin_instance(name: BuiltinName) -> PipelineInstance {
    match name {
        BuiltinName::Motivating => motivating(),
        BuiltinName::Example1 => example1(),
        BuiltinName::Example2 => example2(),
    }
}

fn products(ids: &[&str]) -> Vec<Product> {
    ids.iter()
        .map(|id| Product {
            id: id.to_string(),
            name: format!("Product {id}"),
        })
        .collect()
}

fn linefill(entries: &[(Option<usize>, &[f64])], lines: usize) -> Vec<OldBatch> {
    let vols: Vec<Vec<f64>> = entries.iter().map(|(_, v)| v.to_vec()).collect();
    let coords = coordinates_from_volumes(&vols, lines);
    entries
        .iter()
        .zip(coords)
        .map(|((p, v), c)| OldBatch {
            product: *p,
            volumes: v.to_vec(),
            coordinates: c,
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn depot(
    name: &str,
    line: usize,
    index: usize,
    offset: f64,
    bounds: (f64, f64),
    demand: Vec<f64>,
    backorder: f64,
    dual_purpose: bool,
    batches: usize,
) -> OutputNode {
    let np = demand.len();
    OutputNode {
        name: name.to_string(),
        line,
        index,
        offset,
        deliver_min: bounds.0,
        deliver_max: bounds.1,
        demand,
        backorder_cost: vec![backorder; np],
        dual_purpose,
        eligible: (0..batches).collect(),
    }
}

/// Two refineries, two 40-unit lines, three depots, 20 h horizon.
fn motivating() -> PipelineInstance {
    const P1: usize = 0;
    const P2: usize = 1;
    let old = linefill(&[(Some(P1), &[0.0, 40.0]), (Some(P2), &[40.0, 0.0])], 2);
    let nb = old.len() + 1;
    let node = |line, inventory: Vec<f64>, cost: Vec<f64>| InputNode {
        line,
        inject_min: 5.0,
        inject_max: 15.0,
        rate_min: 0.5,
        rate_max: 1.5,
        inventory,
        pumping_cost: cost,
        eligible: (0..nb).collect(),
    };
    let backorder = 50.0;
    PipelineInstance {
        name: "motivating".into(),
        products: products(&["P1", "P2"]),
        lines: vec![Line { volume: 40.0 }, Line { volume: 40.0 }],
        input_nodes: vec![node(0, vec![0.0, 40.0], vec![3.0, 2.0]), node(1, vec![20.0, 0.0], vec![1.0, 1.5])],
        output_nodes: vec![
            depot("D1", 0, 0, 40.0, (2.0, 20.0), vec![0.0, 22.0], backorder, true, nb),
            depot("D1", 1, 0, 20.0, (2.0, 20.0), vec![5.0, 0.0], backorder, false, nb),
            depot("D2", 1, 1, 40.0, (2.0, 20.0), vec![5.0, 0.0], backorder, false, nb),
        ],
        old_batches: old,
        new_batches: 1,
        time_grid: TimeGrid {
            slot_hours: 10.0,
            slots: 3,
            horizon_hours: 20.0,
        },
        forbidden: vec![vec![false; 2]; 2],
        interface: vec![vec![0.0, 4.0], vec![4.0, 0.0]],
        transfer_min: 0.0,
        transfer_max: 20.0,
        product_caps: vec![100.0, 100.0],
        backorder_default: backorder,
        options: ModelOptions::default(),
    }
}

const A: usize = 0;
const B: usize = 1;

/// Interface reprocessing costs, predecessor rows by successor columns, in
/// hundreds of dollars.
const INTERFACE_COSTS: [[f64; 3]; 3] = [[0.0, 22.0, 35.0], [24.0, 0.0, 21.0], [30.0, 32.0, 0.0]];

/// Pumping costs per unit for sources 1 and 2, in hundreds of dollars.
const PUMPING_COSTS: [[f64; 3]; 2] = [[29.0, 34.0, 49.0], [14.5, 17.0, 24.5]];

struct ExampleData {
    name: &'static str,
    /// Supplies per source, products A, B, C.
    supplies: [[f64; 3]; 2],
    /// Demands per depot D1..D3, products A, B, C.
    demands: [[f64; 3]; 3],
    slot_hours: f64,
    operational_slots: usize,
    reserved_empty_batch: bool,
    new_batches: usize,
    /// Per-slot injection floor; the rate floor applies on top.
    inject_min: f64,
    /// Forbid a product directly trailing itself.
    forbid_repeats: bool,
    backorder: f64,
    options: ModelOptions,
}

fn two_source_example(data: ExampleData) -> PipelineInstance {
    // Downstream-first linefill: I1 (B), I2 (A), optionally a reserved empty
    // batch at the intermediate source, then B and A in line 1.
    let mut fill: Vec<(Option<usize>, &[f64])> = vec![(Some(B), &[0.0, 20.0]), (Some(A), &[0.0, 30.0])];
    if data.reserved_empty_batch {
        fill.push((None, &[0.0, 0.0]));
    }
    fill.extend([(Some(B), &[10.0, 0.0][..]), (Some(A), &[20.0, 0.0][..])]);
    let old = linefill(&fill, 2);
    let new_batches = data.new_batches;
    let nb = old.len() + new_batches;
    let source = |line: usize| InputNode {
        line,
        inject_min: data.inject_min,
        inject_max: 40.0,
        rate_min: 0.8,
        rate_max: 1.2,
        inventory: data.supplies[line].to_vec(),
        pumping_cost: PUMPING_COSTS[line].to_vec(),
        eligible: (0..nb).collect(),
    };
    let bounds = (5.0, 40.0);
    let bo = data.backorder;
    let forbidden = (0..3).map(|p| (0..3).map(|q| data.forbid_repeats && p == q).collect()).collect();
    PipelineInstance {
        name: data.name.into(),
        products: products(&["A", "B", "C"]),
        lines: vec![Line { volume: 30.0 }, Line { volume: 50.0 }],
        input_nodes: vec![source(0), source(1)],
        output_nodes: vec![
            depot("D1", 0, 0, 30.0, bounds, data.demands[0].to_vec(), bo, true, nb),
            depot("D2", 1, 0, 30.0, bounds, data.demands[1].to_vec(), bo, false, nb),
            depot("D3", 1, 1, 50.0, bounds, data.demands[2].to_vec(), bo, false, nb),
        ],
        old_batches: old,
        new_batches,
        time_grid: TimeGrid {
            slot_hours: data.slot_hours,
            slots: data.operational_slots + 1,
            horizon_hours: data.slot_hours * data.operational_slots as f64,
        },
        forbidden,
        interface: INTERFACE_COSTS.iter().map(|r| r.to_vec()).collect(),
        transfer_min: 0.0,
        transfer_max: 40.0,
        product_caps: vec![200.0, 200.0, 200.0],
        backorder_default: bo,
        options: data.options,
    }
}

fn example1() -> PipelineInstance {
    two_source_example(ExampleData {
        name: "example1",
        supplies: [[50.0, 80.0, 30.0], [20.0, 60.0, 40.0]],
        demands: [[60.0, 0.0, 0.0], [60.0, 0.0, 60.0], [0.0, 100.0, 0.0]],
        slot_hours: 10.0,
        operational_slots: 24,
        reserved_empty_batch: true,
        new_batches: 3,
        inject_min: 10.0,
        forbid_repeats: true,
        backorder: 10_000.0,
        options: ModelOptions {
            cost_scale: 100.0,
            ..ModelOptions::default()
        },
    })
}

fn example2() -> PipelineInstance {
    two_source_example(ExampleData {
        name: "example2",
        supplies: [[20.0, 40.0, 20.0], [10.0, 30.0, 20.0]],
        demands: [[30.0, 0.0, 0.0], [30.0, 0.0, 30.0], [0.0, 50.0, 0.0]],
        slot_hours: 8.5,
        operational_slots: 14,
        reserved_empty_batch: false,
        new_batches: 2,
        inject_min: 0.0,
        forbid_repeats: false,
        backorder: 5_000.0,
        options: ModelOptions {
            exclusive_injection: true,
            force_active_injection: false,
            cost_scale: 100.0,
            ..ModelOptions::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::validate_instance;

    // Golden copies of the published tables, kept apart from the builder
    // code above.
    const EXAMPLE1_SUPPLY: [(&str, f64, f64); 3] = [("A", 50.0, 20.0), ("B", 80.0, 60.0), ("C", 30.0, 40.0)];
    const EXAMPLE1_DEMAND: [(&str, f64, f64, f64); 3] =
        [("A", 60.0, 60.0, 0.0), ("B", 0.0, 0.0, 100.0), ("C", 0.0, 60.0, 0.0)];
    const INTERFACE_GOLDEN: [(&str, &str, f64); 6] = [
        ("A", "B", 22.0),
        ("A", "C", 35.0),
        ("B", "A", 24.0),
        ("B", "C", 21.0),
        ("C", "A", 30.0),
        ("C", "B", 32.0),
    ];
    const PUMPING_GOLDEN: [(&str, f64, f64); 3] = [("A", 29.0, 14.5), ("B", 34.0, 17.0), ("C", 49.0, 24.5)];
    const EXAMPLE2_SUPPLY: [(&str, f64, f64); 3] = [("A", 20.0, 10.0), ("B", 40.0, 30.0), ("C", 20.0, 20.0)];
    const EXAMPLE2_DEMAND: [(&str, f64, f64, f64); 3] =
        [("A", 30.0, 30.0, 0.0), ("B", 0.0, 0.0, 50.0), ("C", 0.0, 30.0, 0.0)];

    fn check_supply_demand(
        inst: &PipelineInstance,
        supply: &[(&str, f64, f64)],
        demand: &[(&str, f64, f64, f64)],
    ) {
        for &(id, s1, s2) in supply {
            let p = inst.product_index(id).unwrap();
            assert_eq!(inst.input_nodes[0].inventory[p], s1, "supply {id} at L1");
            assert_eq!(inst.input_nodes[1].inventory[p], s2, "supply {id} at L2");
        }
        for &(id, d1, d2, d3) in demand {
            let p = inst.product_index(id).unwrap();
            let got: Vec<f64> = inst.output_nodes.iter().map(|d| d.demand[p]).collect();
            assert_eq!(got, vec![d1, d2, d3], "demand of {id}");
        }
    }

    #[test]
    fn example1_matches_published_data() {
        let inst = builtin_instance(BuiltinName::Example1);
        check_supply_demand(&inst, &EXAMPLE1_SUPPLY, &EXAMPLE1_DEMAND);
        for &(p, q, c) in &INTERFACE_GOLDEN {
            let (p, q) = (inst.product_index(p).unwrap(), inst.product_index(q).unwrap());
            assert_eq!(inst.interface_cost(p, q), c);
        }
        for &(id, c1, c2) in &PUMPING_GOLDEN {
            let p = inst.product_index(id).unwrap();
            assert_eq!(inst.input_nodes[0].pumping_cost[p], c1);
            assert_eq!(inst.input_nodes[1].pumping_cost[p], c2);
        }
        assert_eq!(inst.time_grid.slot_hours, 10.0);
        assert_eq!(inst.time_grid.horizon_hours, 240.0);
        for n in &inst.input_nodes {
            assert_eq!((n.inject_min, n.inject_max), (10.0, 40.0));
        }
        assert!(inst.output_nodes.iter().all(|d| d.deliver_min == 5.0));
        assert!(!inst.options.exclusive_injection);
    }

    #[test]
    fn example1_spot_values() {
        let inst = builtin_instance(BuiltinName::Example1);
        let a = inst.product_index("A").unwrap();
        assert_eq!(inst.output_nodes[0].demand[a], 60.0);
        let (b, c) = (inst.product_index("B").unwrap(), inst.product_index("C").unwrap());
        assert_eq!(inst.interface_cost(b, c), 21.0);
    }

    #[test]
    fn example2_matches_published_data() {
        let inst = builtin_instance(BuiltinName::Example2);
        check_supply_demand(&inst, &EXAMPLE2_SUPPLY, &EXAMPLE2_DEMAND);
        let c = inst.product_index("C").unwrap();
        assert_eq!(inst.input_nodes[1].inventory[c], 20.0);
        assert_eq!(inst.time_grid.slot_hours, 8.5);
        assert!(inst.options.exclusive_injection);
        let fill: Vec<_> = inst.old_batches.iter().map(|b| (b.product, b.volumes.clone())).collect();
        let (a, b) = (Some(0), Some(1));
        assert_eq!(
            fill,
            vec![(b, vec![0.0, 20.0]), (a, vec![0.0, 30.0]), (b, vec![10.0, 0.0]), (a, vec![20.0, 0.0])]
        );
        // Smallest admissible injection is the rate floor over one slot.
        let n = &inst.input_nodes[0];
        assert!((n.inject_min.max(n.rate_min * 8.5) - 6.8).abs() < 1e-12);
    }

    #[test]
    fn motivating_matches_narrative() {
        let inst = builtin_instance(BuiltinName::Motivating);
        assert_eq!(inst.lines.iter().map(|l| l.volume).collect::<Vec<_>>(), vec![40.0, 40.0]);
        assert_eq!(inst.time_grid.horizon_hours, 20.0);
        let (p1, p2) = (0, 1);
        assert_eq!(inst.output_nodes[0].demand[p2], 22.0);
        assert_eq!(inst.output_nodes[1].demand[p1], 5.0);
        assert_eq!(inst.output_nodes[2].demand[p1], 5.0);
        assert_eq!(inst.old_batches[1].product, Some(p2));
        assert_eq!(inst.old_batches[1].volumes, vec![40.0, 0.0]);
        assert_eq!(inst.old_batches[0].product, Some(p1));
        assert_eq!(inst.old_batches[0].volumes, vec![0.0, 40.0]);
    }

    #[test]
    fn every_builtin_is_valid() {
        for name in BuiltinName::ALL {
            let rep = validate_instance(&builtin_instance(name));
            assert!(rep.is_empty(), "{name}: {:?}", rep.findings);
        }
    }

    #[test]
    fn names_parse() {
        for name in BuiltinName::ALL {
            assert_eq!(name.as_str().parse::<BuiltinName>().unwrap(), name);
        }
        assert!("example3".parse::<BuiltinName>().is_err());
    }
}
