use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::instance::{PipelineInstance, VOLUME_TOL};

use super::ResolvedPlan;

/// Batch volumes per line after every slot: `volumes[state][line][batch]`,
/// state 0 being the initial linefill.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub volumes: Vec<Vec<Vec<f64>>>,
}

impl Trajectory {
    /// Upper coordinate: own volume plus everything behind the batch.
    pub fn coordinate(&self, state: usize, line: usize, batch: usize) -> f64 {
        self.volumes[state][line][batch..].iter().sum()
    }

    /// Lower coordinate: volume of every batch behind.
    pub fn tail(&self, state: usize, line: usize, batch: usize) -> f64 {
        self.volumes[state][line][batch + 1..].iter().sum()
    }

    pub fn line_total(&self, state: usize, line: usize) -> f64 {
        self.volumes[state][line].iter().sum()
    }

    pub fn states(&self) -> usize {
        self.volumes.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Rule identifier: the constraint number it restates, or a named rule
    /// (`exclusive`, `eligibility`).
    pub rule: String,
    pub index: String,
    pub measured: f64,
    pub bound: f64,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn rules(&self) -> Vec<&str> {
        let mut r: Vec<&str> = self.violations.iter().map(|v| v.rule.as_str()).collect();
        r.sort();
        r.dedup();
        r
    }

    pub fn has_rule(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    fn push(&mut self, rule: &str, index: String, measured: f64, bound: f64, message: impl Into<String>) {
        self.violations.push(Violation {
            rule: rule.to_string(),
            index,
            measured,
            bound,
            message: message.into(),
        });
    }
}

impl fmt::Display for ViolationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(
                f,
                "rule {} at {}: {} (measured {}, bound {})",
                v.rule, v.index, v.message, v.measured, v.bound
            )?;
        }
        Ok(())
    }
}

/// Per-slot flows aggregated by (line or depot, batch).
struct SlotFlows {
    inject: BTreeMap<(usize, usize), f64>,
    deliver: BTreeMap<(usize, usize), f64>,
    transfer: BTreeMap<(usize, usize), f64>,
}

fn flows(plan: &ResolvedPlan, slot: usize) -> SlotFlows {
    let s = &plan.slots[slot - 1];
    let mut f = SlotFlows {
        inject: BTreeMap::new(),
        deliver: BTreeMap::new(),
        transfer: BTreeMap::new(),
    };
    for &(l, i, _, v) in &s.injections {
        *f.inject.entry((l, i)).or_default() += v;
    }
    for &(d, i, v) in &s.deliveries {
        *f.deliver.entry((d, i)).or_default() += v;
    }
    for &(l, i, v) in &s.transfers {
        *f.transfer.entry((l, i)).or_default() += v;
    }
    f
}

/// Forward mass balance from the initial linefill. Volumes may go negative
/// when a plan withdraws more than a batch holds; [`check`] reports that.
pub fn simulate(inst: &PipelineInstance, plan: &ResolvedPlan) -> Trajectory {
    let nb = inst.batch_count();
    let nl = inst.lines.len();
    let init: Vec<Vec<f64>> = (0..nl)
        .map(|l| (0..nb).map(|i| inst.initial_volume(i, l)).collect())
        .collect();
    let mut volumes = vec![init];
    for t in 1..=plan.slots.len() {
        let mut w = volumes[t - 1].clone();
        let f = flows(plan, t);
        for (&(l, i), v) in &f.inject {
            w[l][i] += v;
        }
        for (&(d, i), v) in &f.deliver {
            w[inst.output_nodes[d].line][i] -= v;
        }
        for (&(l, i), v) in &f.transfer {
            w[l][i] += v;
            w[l - 1][i] -= v;
        }
        volumes.push(w);
    }
    Trajectory { volumes }
}

/// Product carried by each batch under `plan`: fixed linefill products,
/// then the first injected product, then explicit assignments.
pub(crate) fn batch_products(inst: &PipelineInstance, plan: &ResolvedPlan) -> Vec<Option<usize>> {
    let mut out: Vec<Option<usize>> = (0..inst.batch_count()).map(|i| inst.fixed_product(i)).collect();
    for s in &plan.slots {
        for &(_, i, p, _) in &s.injections {
            out[i].get_or_insert(p);
        }
    }
    for (i, p) in plan.assignments.iter().enumerate() {
        if let Some(p) = p {
            out[i].get_or_insert(*p);
        }
    }
    out
}

/// Verify every operational rule of `plan` at volume tolerance 1e-6.
/// Unmet demand is not a violation; see [`plan_cost`].
pub fn check(inst: &PipelineInstance, plan: &ResolvedPlan) -> ViolationReport {
    let mut rep = check_upto(inst, plan, plan.slots.len(), true);
    if plan.slots.len() != inst.time_grid.operational_slots() {
        rep.push(
            "T",
            "plan".into(),
            plan.slots.len() as f64,
            inst.time_grid.operational_slots() as f64,
            "plan length differs from the number of operational slots",
        );
    }
    rep
}

/// Rules of slots `1..=upto` plus the prefix-monotone horizon rules
/// (inventory, product caps, forbidden sequences). With `complete`, the
/// end-of-horizon assignment rules are checked as well.
pub(crate) fn check_upto(inst: &PipelineInstance, plan: &ResolvedPlan, upto: usize, complete: bool) -> ViolationReport {
    let tol = VOLUME_TOL;
    let mut rep = ViolationReport::default();
    let traj = simulate(inst, plan);
    let nb = inst.batch_count();
    let nl = inst.lines.len();
    let np = inst.products.len();
    let dt = inst.time_grid.slot_hours;
    let products = batch_products(inst, plan);
    let bl = |i: usize| inst.batch_label(i);

    // Assignment consistency.
    for (i, fixed) in (0..nb).map(|i| (i, inst.fixed_product(i))) {
        if let (Some(f), Some(p)) = (fixed, plan.assignments[i]) {
            if f != p {
                rep.push("1", bl(i), p as f64, f as f64, "assignment contradicts the linefill product");
            }
        }
    }
    let mut injected_into = vec![false; nb];
    let mut cumulative = vec![vec![0.0; np]; inst.input_nodes.len()];
    let mut batch_in = vec![0.0; nb];
    let mut batch_out = vec![0.0; nb];

    for t in 1..=upto {
        let f = flows(plan, t);
        let s = &plan.slots[t - 1];
        let at = |what: String| format!("{what},t={t}");

        for &(l, i, p, v) in &s.injections {
            if products[i] != Some(p) {
                rep.push("15", at(format!("{},L{}", bl(i), l + 1)), p as f64, products[i].map_or(-1.0, |q| q as f64), "injected product differs from the batch product");
            }
            if let Some(n) = inst.input_node_of_line(l) {
                cumulative[n][p] += v;
            }
        }

        // Injection.
        let mut active_nodes = 0;
        for node in &inst.input_nodes {
            let l = node.line;
            let here: Vec<(usize, f64)> = f.inject.iter().filter(|((k, _), _)| *k == l).map(|(&(_, i), &v)| (i, v)).collect();
            if here.is_empty() {
                continue;
            }
            active_nodes += 1;
            if here.len() > 1 {
                rep.push("7", at(format!("L{}", l + 1)), here.len() as f64, 1.0, "node enlarges more than one batch");
            }
            let total: f64 = here.iter().map(|(_, v)| v).sum();
            if total < dt * node.rate_min - tol || total > dt * node.rate_max + tol {
                rep.push("13", at(format!("L{}", l + 1)), total, if total < dt * node.rate_min { dt * node.rate_min } else { dt * node.rate_max }, "pumping rate outside bounds");
            }
            for &(i, v) in &here {
                let idx = at(format!("{},L{}", bl(i), l + 1));
                injected_into[i] = true;
                batch_in[i] += v;
                if !node.eligible.contains(&i) {
                    rep.push("eligibility", idx.clone(), v, 0.0, "node may not enlarge this batch");
                }
                if v < node.inject_min - tol || v > node.inject_max + tol {
                    rep.push("12", idx.clone(), v, if v < node.inject_min { node.inject_min } else { node.inject_max }, "injected volume outside bounds");
                }
                let tail = traj.tail(t, l, i);
                if tail > tol {
                    rep.push("10", idx.clone(), tail, 0.0, "batch tail is not at the line origin");
                }
                if l > 0 {
                    let up = traj.coordinate(t, l - 1, i);
                    if up < inst.lines[l - 1].volume - tol {
                        rep.push("11", idx.clone(), up, inst.lines[l - 1].volume, "batch does not reach the end of the upstream line");
                    }
                }
            }
        }
        if active_nodes == 0 && inst.options.force_active_injection {
            rep.push("8", format!("t={t}"), 0.0, 1.0, "no input node is active");
        }
        if active_nodes > 1 && inst.options.exclusive_injection {
            rep.push("exclusive", format!("t={t}"), active_nodes as f64, 1.0, "more than one input node is active");
        }

        // Delivery.
        for (&(d, i), &v) in &f.deliver {
            let dep = &inst.output_nodes[d];
            let l = dep.line;
            let idx = at(format!("{},{}", bl(i), inst.depot_tag(d)));
            batch_out[i] += v;
            if !dep.eligible.contains(&i) {
                rep.push("eligibility", idx.clone(), v, 0.0, "depot may not receive from this batch");
            }
            if products[i].is_none() {
                rep.push("21", idx.clone(), v, 0.0, "delivery from a batch without product");
            }
            if v < dep.deliver_min - tol || v > dep.deliver_max + tol {
                rep.push("19", idx.clone(), v, if v < dep.deliver_min { dep.deliver_min } else { dep.deliver_max }, "delivered volume outside bounds");
            }
            let (upper, tail) = (traj.coordinate(t, l, i), traj.tail(t - 1, l, i));
            if tail > dep.offset + tol {
                rep.push("17", idx.clone(), tail, dep.offset, "batch tail lies past the depot");
            }
            if upper < dep.offset - tol {
                rep.push("18", idx.clone(), upper, dep.offset, "batch head has not reached the depot");
            }
            let out_line: f64 = f.deliver.iter().filter(|((k, j), _)| *j == i && inst.output_nodes[*k].line == l).map(|(_, v)| v).sum();
            let refill = f.inject.get(&(l, i)).copied().unwrap_or(0.0) + f.transfer.get(&(l, i)).copied().unwrap_or(0.0);
            let cap = dep.offset - tail + refill;
            if out_line > cap + tol {
                rep.push("20", idx.clone(), out_line, cap, "delivery exceeds the volume that passed the depot");
            }
        }

        // Transfer.
        for (&(l, i), &v) in &f.transfer {
            let idx = at(format!("{},L{}", bl(i), l + 1));
            if v < inst.transfer_min - tol || v > inst.transfer_max + tol {
                rep.push("26", idx.clone(), v, if v < inst.transfer_min { inst.transfer_min } else { inst.transfer_max }, "transferred volume outside bounds");
            }
            let tail = traj.tail(t - 1, l, i);
            if tail > tol {
                rep.push("24", idx.clone(), tail, 0.0, "transferred batch tail is not at the line origin");
            }
            let up = traj.coordinate(t, l - 1, i);
            if up < inst.lines[l - 1].volume - tol {
                rep.push("25", idx.clone(), up, inst.lines[l - 1].volume, "batch does not reach the end of the upstream line");
            }
        }
        for l in 1..nl {
            let moved: f64 = f.transfer.iter().filter(|((k, _), _)| *k == l).map(|(_, v)| v).sum();
            let pumping = f.inject.keys().any(|(k, _)| *k == l);
            if moved > tol && pumping {
                rep.push("27", format!("L{},t={t}", l + 1), moved, 0.0, "transfer into a line whose input node is pumping");
            }
        }

        // Mass balance, fullness, conservation, motion.
        for l in 0..nl {
            let vl = inst.lines[l].volume;
            for i in 0..nb {
                let w = traj.volumes[t][l][i];
                if w < -tol {
                    rep.push("28", format!("{},L{},t={t}", bl(i), l + 1), w, 0.0, "negative batch volume");
                }
                let (now, before) = (traj.coordinate(t, l, i), traj.coordinate(t - 1, l, i));
                if now < before - tol {
                    rep.push("5", format!("{},L{},t={t}", bl(i), l + 1), now, before, "batch moved upstream");
                }
                if now > vl + tol {
                    rep.push("6", format!("{},L{},t={t}", bl(i), l + 1), now, vl, "coordinate beyond the line end");
                }
            }
            let total = traj.line_total(t, l);
            if (total - vl).abs() > tol {
                rep.push("30", format!("L{},t={t}", l + 1), total, vl, "line is not full");
            }
            let inflow: f64 = f.inject.iter().filter(|((k, _), _)| *k == l).map(|(_, v)| v).sum::<f64>()
                + f.transfer.iter().filter(|((k, _), _)| *k == l).map(|(_, v)| v).sum::<f64>();
            let outflow: f64 = f.deliver.iter().filter(|((d, _), _)| inst.output_nodes[*d].line == l).map(|(_, v)| v).sum::<f64>()
                + f.transfer.iter().filter(|((k, _), _)| *k == l + 1).map(|(_, v)| v).sum::<f64>();
            if (inflow - outflow).abs() > tol {
                rep.push("31", format!("L{},t={t}", l + 1), inflow - outflow, 0.0, "line inflow differs from outflow");
            }
        }
    }

    // Horizon-wide rules.
    for (n, node) in inst.input_nodes.iter().enumerate() {
        for (p, &pumped) in cumulative[n].iter().enumerate() {
            if pumped > node.inventory[p] + tol {
                rep.push("16", format!("{},L{}", inst.products[p].id, node.line + 1), pumped, node.inventory[p], "injection exceeds inventory");
            }
        }
    }
    for i in 0..nb {
        if inst.is_assignable(i) && complete {
            if products[i].is_some() && !injected_into[i] {
                rep.push("9", bl(i), 0.0, 1.0, "batch carries a product but is never injected");
            }
            if products[i].is_none() && inst.is_required(i) {
                rep.push("1", bl(i), 0.0, 1.0, "required batch never receives a product");
            }
        }
        if let Some(p) = products[i] {
            let cap = inst.product_caps[p];
            if batch_in[i] > cap + tol {
                rep.push("15", bl(i), batch_in[i], cap, "batch volume exceeds the product cap");
            }
            if batch_out[i] > cap + tol {
                rep.push("21", bl(i), batch_out[i], cap, "batch deliveries exceed the product cap");
            }
        }
    }
    for i in 1..nb {
        if let (Some(p), Some(q)) = (products[i - 1], products[i]) {
            if inst.forbidden[p][q] {
                rep.push("2", format!("{},{}", bl(i - 1), bl(i)), 1.0, 0.0, format!("forbidden sequence {} -> {}", inst.products[p].id, inst.products[q].id));
            }
        }
    }
    rep
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanCost {
    pub pumping: f64,
    pub interface: f64,
    pub backorder: f64,
    pub total: f64,
    /// (product, depot, delivered, shortfall)
    pub demand: Vec<(usize, usize, f64, f64)>,
    /// (predecessor batch, successor batch, predecessor product, successor product, cost)
    pub interfaces: Vec<(usize, usize, usize, usize, f64)>,
}

impl PlanCost {
    pub fn total_shortfall(&self) -> f64 {
        self.demand.iter().map(|d| d.3).sum()
    }
}

/// Cost of a plan from its events alone.
pub fn plan_cost(inst: &PipelineInstance, plan: &ResolvedPlan) -> PlanCost {
    let scale = inst.options.cost_scale;
    let products = batch_products(inst, plan);
    let mut pumping = 0.0;
    let mut delivered = vec![vec![0.0; inst.products.len()]; inst.output_nodes.len()];
    for s in &plan.slots {
        for &(l, _, p, v) in &s.injections {
            if let Some(n) = inst.input_node_of_line(l) {
                pumping += inst.input_nodes[n].pumping_cost[p] * v;
            }
        }
        for &(d, i, v) in &s.deliveries {
            if let Some(p) = products[i] {
                delivered[d][p] += v;
            }
        }
    }
    let mut demand = Vec::new();
    let mut backorder = 0.0;
    for (d, dep) in inst.output_nodes.iter().enumerate() {
        for (p, &got) in delivered[d].iter().enumerate() {
            let short = (dep.demand[p] - got).max(0.0);
            backorder += dep.backorder_cost[p] * short;
            if dep.demand[p] > 0.0 || got > 0.0 {
                demand.push((p, d, got, short));
            }
        }
    }
    let mut interfaces = Vec::new();
    for i in 1..inst.batch_count() {
        if let (Some(p), Some(q)) = (products[i - 1], products[i]) {
            let c = inst.interface_cost(p, q);
            if p != q || c > 0.0 {
                interfaces.push((i - 1, i, p, q, c));
            }
        }
    }
    let interface: f64 = interfaces.iter().map(|x| x.4).sum();
    let pumping = scale * pumping;
    let interface = scale * interface;
    PlanCost {
        pumping,
        interface,
        backorder,
        total: pumping + interface + backorder,
        demand,
        interfaces,
    }
}

/// Volume pumped beyond what was needed to cover demand: total injected
/// minus total delivered against demand.
pub fn surplus_pumped(inst: &PipelineInstance, plan: &ResolvedPlan) -> f64 {
    let injected: f64 = plan.slots.iter().flat_map(|s| s.injections.iter()).map(|e| e.3).sum();
    let cost = plan_cost(inst, plan);
    let useful: f64 = cost
        .demand
        .iter()
        .map(|&(p, d, got, _)| got.min(inst.output_nodes[d].demand[p]))
        .sum();
    injected - useful
}
