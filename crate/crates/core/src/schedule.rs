//! Event-level schedules extracted from solver solutions, their cost
//! breakdown and report renderings.
//!
//! Events are slot-granular. Simultaneous events of one slot carry no order.

use std::fmt::Write;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::ScheduleError;
use crate::instance::PipelineInstance;
use crate::milp::{MilpModel, VarRef};
use crate::oracle::{plan_cost, simulate, unresolve, OperatingPlan, ResolvedPlan, ResolvedSlot};
use crate::solver::Solution;

/// Volumes at or below this are solver noise, not flows.
pub const EVENT_THRESHOLD: f64 = 1e-6;
const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InjectionRun {
    pub line: usize,
    pub slot: usize,
    pub batch: usize,
    pub product: usize,
    pub volume: f64,
    /// Volume per hour over the slot.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeliveryEvent {
    pub depot: usize,
    pub slot: usize,
    pub batch: usize,
    pub product: Option<usize>,
    pub volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferEvent {
    pub from_line: usize,
    pub to_line: usize,
    pub slot: usize,
    pub batch: usize,
    pub volume: f64,
}

/// Batch coordinates and volumes at one state, indexed `[line][batch]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub state: usize,
    pub coordinates: Vec<Vec<f64>>,
    pub volumes: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    pub operational_slots: usize,
    pub slot_hours: f64,
    pub injections: Vec<InjectionRun>,
    pub deliveries: Vec<DeliveryEvent>,
    pub transfers: Vec<TransferEvent>,
    /// States `0..=operational_slots`; state 0 is the initial linefill.
    pub snapshots: Vec<Snapshot>,
    pub assignment: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackorderLine {
    pub product: usize,
    pub depot: usize,
    pub demand: f64,
    pub delivered: f64,
    pub shortfall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterfaceLine {
    pub predecessor: usize,
    pub successor: usize,
    pub from_product: usize,
    pub to_product: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub pumping: f64,
    pub interface: f64,
    pub backorder: f64,
    pub total: f64,
    pub backorders: Vec<BackorderLine>,
    pub interfaces: Vec<InterfaceLine>,
}

impl CostBreakdown {
    pub fn backorder_volume(&self) -> f64 {
        self.backorders.iter().map(|b| b.shortfall).sum()
    }

    /// Interfaces between different products.
    pub fn product_interfaces(&self) -> usize {
        self.interfaces.iter().filter(|i| i.from_product != i.to_product).count()
    }
}

/// Read the schedule encoded by `sol`.
pub fn extract_schedule(inst: &PipelineInstance, model: &MilpModel, sol: &Solution) -> Result<Schedule, ScheduleError> {
    if !sol.status.has_incumbent() {
        return Err(ScheduleError::NoIncumbent(sol.status));
    }
    let x = &sol.values;
    for (v, &val) in model.variables.iter().zip(x) {
        if v.domain.is_integral() && (val - val.round()).abs() > INTEGRALITY_TOL {
            return Err(ScheduleError::DegenerateSolution {
                name: v.name.clone(),
                value: val,
            });
        }
    }
    let val = |key: VarRef| model.value(x, &key);
    let nb = inst.batch_count();
    let nl = inst.lines.len();
    let np = inst.products.len();
    let ops = inst.time_grid.operational_slots();
    let dt = inst.time_grid.slot_hours;

    let assignment: Vec<Option<usize>> = (0..nb)
        .map(|i| (0..np).find(|&p| val(VarRef::Assign { batch: i, product: p }) > 0.5))
        .collect();

    let mut injections = Vec::new();
    let mut deliveries = Vec::new();
    let mut transfers = Vec::new();
    for t in 1..=ops {
        for l in 0..nl {
            for (i, &assigned) in assignment.iter().enumerate() {
                let v = val(VarRef::Injected { batch: i, line: l, slot: t });
                if v > EVENT_THRESHOLD {
                    let product = assigned.unwrap_or_else(|| {
                        (0..np)
                            .max_by(|&a, &b| {
                                let ra = val(VarRef::InjectedProduct { batch: i, product: a, line: l, slot: t });
                                let rb = val(VarRef::InjectedProduct { batch: i, product: b, line: l, slot: t });
                                ra.total_cmp(&rb)
                            })
                            .unwrap_or(0)
                    });
                    injections.push(InjectionRun {
                        line: l,
                        slot: t,
                        batch: i,
                        product,
                        volume: v,
                        rate: v / dt,
                    });
                }
            }
        }
        for d in 0..inst.output_nodes.len() {
            for (i, &assigned) in assignment.iter().enumerate() {
                let v = val(VarRef::Delivered { batch: i, depot: d, slot: t });
                if v > EVENT_THRESHOLD {
                    deliveries.push(DeliveryEvent {
                        depot: d,
                        slot: t,
                        batch: i,
                        product: assigned,
                        volume: v,
                    });
                }
            }
        }
        for l in 1..nl {
            for i in 0..nb {
                let v = val(VarRef::Transferred { batch: i, line: l, slot: t });
                if v > EVENT_THRESHOLD {
                    transfers.push(TransferEvent {
                        from_line: l - 1,
                        to_line: l,
                        slot: t,
                        batch: i,
                        volume: v,
                    });
                }
            }
        }
    }
    let snapshots = (0..=ops)
        .map(|s| Snapshot {
            state: s,
            coordinates: (0..nl)
                .map(|l| (0..nb).map(|i| val(VarRef::Coord { batch: i, line: l, state: s })).collect())
                .collect(),
            volumes: (0..nl)
                .map(|l| (0..nb).map(|i| val(VarRef::Volume { batch: i, line: l, state: s })).collect())
                .collect(),
        })
        .collect();
    Ok(Schedule {
        operational_slots: ops,
        slot_hours: dt,
        injections,
        deliveries,
        transfers,
        snapshots,
        assignment,
    })
}

impl Schedule {
    /// Schedule of an oracle plan, with snapshots from forward simulation.
    pub fn from_plan(inst: &PipelineInstance, plan: &ResolvedPlan) -> Self {
        let products = crate::oracle::batch_products(inst, plan);
        let dt = inst.time_grid.slot_hours;
        let mut out = Schedule {
            operational_slots: plan.slots.len(),
            slot_hours: dt,
            injections: Vec::new(),
            deliveries: Vec::new(),
            transfers: Vec::new(),
            snapshots: Vec::new(),
            assignment: products.clone(),
        };
        for (k, s) in plan.slots.iter().enumerate() {
            let t = k + 1;
            for &(l, i, p, v) in &s.injections {
                out.injections.push(InjectionRun {
                    line: l,
                    slot: t,
                    batch: i,
                    product: p,
                    volume: v,
                    rate: v / dt,
                });
            }
            for &(d, i, v) in &s.deliveries {
                out.deliveries.push(DeliveryEvent {
                    depot: d,
                    slot: t,
                    batch: i,
                    product: products[i],
                    volume: v,
                });
            }
            for &(l, i, v) in &s.transfers {
                out.transfers.push(TransferEvent {
                    from_line: l - 1,
                    to_line: l,
                    slot: t,
                    batch: i,
                    volume: v,
                });
            }
        }
        let traj = simulate(inst, plan);
        for (s, vols) in traj.volumes.iter().enumerate() {
            out.snapshots.push(Snapshot {
                state: s,
                coordinates: (0..inst.lines.len())
                    .map(|l| (0..inst.batch_count()).map(|i| traj.coordinate(s, l, i)).collect())
                    .collect(),
                volumes: vols.clone(),
            });
        }
        out
    }

    /// Slot decisions of this schedule. Batches assigned a product without
    /// any injection keep that product through explicit assignments.
    pub fn to_resolved_plan(&self, inst: &PipelineInstance) -> ResolvedPlan {
        let mut plan = ResolvedPlan {
            slots: vec![ResolvedSlot::default(); self.operational_slots],
            assignments: vec![None; inst.batch_count()],
        };
        for e in &self.injections {
            plan.slots[e.slot - 1].injections.push((e.line, e.batch, e.product, e.volume));
        }
        for e in &self.deliveries {
            plan.slots[e.slot - 1].deliveries.push((e.depot, e.batch, e.volume));
        }
        for e in &self.transfers {
            plan.slots[e.slot - 1].transfers.push((e.to_line, e.batch, e.volume));
        }
        for (i, p) in self.assignment.iter().enumerate() {
            let injected = self.injections.iter().any(|e| e.batch == i);
            if inst.fixed_product(i).is_none() && !injected {
                plan.assignments[i] = *p;
            }
        }
        plan
    }

    pub fn to_plan(&self, inst: &PipelineInstance) -> OperatingPlan {
        unresolve(inst, &self.to_resolved_plan(inst))
    }

    /// Largest deviation from line fullness or from `F_i = W_i + F_{i+1}`
    /// over all snapshots.
    pub fn snapshot_residual(&self, inst: &PipelineInstance) -> f64 {
        let mut worst: f64 = 0.0;
        for s in &self.snapshots {
            for (l, line) in inst.lines.iter().enumerate() {
                let w = &s.volumes[l];
                let f = &s.coordinates[l];
                worst = worst.max((w.iter().sum::<f64>() - line.volume).abs());
                for i in 0..w.len() {
                    let next = f.get(i + 1).copied().unwrap_or(0.0);
                    worst = worst.max((f[i] - w[i] - next).abs());
                }
            }
        }
        worst
    }
}

/// Costs recomputed from the schedule's events alone.
pub fn cost_breakdown(inst: &PipelineInstance, schedule: &Schedule) -> CostBreakdown {
    let c = plan_cost(inst, &schedule.to_resolved_plan(inst));
    CostBreakdown {
        pumping: c.pumping,
        interface: c.interface,
        backorder: c.backorder,
        total: c.total,
        backorders: c
            .demand
            .iter()
            .map(|&(p, d, got, short)| BackorderLine {
                product: p,
                depot: d,
                demand: inst.output_nodes[d].demand[p],
                delivered: got,
                shortfall: short,
            })
            .collect(),
        interfaces: c
            .interfaces
            .iter()
            .map(|&(a, b, p, q, cost)| InterfaceLine {
                predecessor: a,
                successor: b,
                from_product: p,
                to_product: q,
                cost: cost * inst.options.cost_scale,
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
    GanttJson,
}

impl ReportFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            ReportFormat::Text => "text",
            ReportFormat::Json => "json",
            ReportFormat::GanttJson => "gantt_json",
        }
    }
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            "gantt_json" | "gantt" => Ok(ReportFormat::GanttJson),
            _ => Err(format!("unknown report format `{s}` (text|json|gantt_json)")),
        }
    }
}

fn product_id(inst: &PipelineInstance, p: Option<usize>) -> Value {
    p.map_or(Value::Null, |p| Value::from(inst.products[p].id.as_str()))
}

fn costs_json(inst: &PipelineInstance, c: &CostBreakdown) -> Value {
    json!({
        "pumping": c.pumping,
        "interface": c.interface,
        "backorder": c.backorder,
        "total": c.total,
        "backorder_volume": c.backorder_volume(),
        "backorders": c.backorders.iter().map(|b| json!({
            "product": inst.products[b.product].id,
            "depot": inst.depot_tag(b.depot),
            "demand": b.demand,
            "delivered": b.delivered,
            "shortfall": b.shortfall,
        })).collect::<Vec<_>>(),
        "interfaces": c.interfaces.iter().map(|i| json!({
            "batches": [inst.batch_label(i.predecessor), inst.batch_label(i.successor)],
            "products": [inst.products[i.from_product].id, inst.products[i.to_product].id],
            "cost": i.cost,
        })).collect::<Vec<_>>(),
    })
}

fn slot_events_json(inst: &PipelineInstance, s: &Schedule, t: usize) -> Value {
    json!({
        "injections": s.injections.iter().filter(|e| e.slot == t).map(|e| json!({
            "node": format!("L{}", e.line + 1),
            "batch": inst.batch_label(e.batch),
            "product": inst.products[e.product].id,
            "volume": e.volume,
            "rate": e.rate,
        })).collect::<Vec<_>>(),
        "deliveries": s.deliveries.iter().filter(|e| e.slot == t).map(|e| json!({
            "depot": inst.depot_tag(e.depot),
            "batch": inst.batch_label(e.batch),
            "product": product_id(inst, e.product),
            "volume": e.volume,
        })).collect::<Vec<_>>(),
        "transfers": s.transfers.iter().filter(|e| e.slot == t).map(|e| json!({
            "from": format!("L{}", e.from_line + 1),
            "into": format!("L{}", e.to_line + 1),
            "batch": inst.batch_label(e.batch),
            "volume": e.volume,
        })).collect::<Vec<_>>(),
    })
}

/// Occupied segments of a snapshot, ordered by line then by position.
fn segments(inst: &PipelineInstance, s: &Schedule, snap: &Snapshot) -> Vec<Value> {
    let mut out = Vec::new();
    for l in 0..inst.lines.len() {
        for i in (0..inst.batch_count()).rev() {
            let w = snap.volumes[l][i];
            if w > EVENT_THRESHOLD {
                let hi = snap.coordinates[l][i];
                out.push(json!({
                    "line": format!("L{}", l + 1),
                    "batch": inst.batch_label(i),
                    "product": product_id(inst, s.assignment[i]),
                    "lo": hi - w,
                    "hi": hi,
                }));
            }
        }
    }
    out
}

/// Render `schedule` in the requested format. Output ends with a newline.
pub fn render_report(inst: &PipelineInstance, schedule: &Schedule, format: ReportFormat) -> Vec<u8> {
    let costs = cost_breakdown(inst, schedule);
    let mut text = match format {
        ReportFormat::Text => render_text(inst, schedule, &costs),
        ReportFormat::Json => {
            let slots: Vec<Value> = (1..=schedule.operational_slots)
                .map(|t| {
                    let mut v = slot_events_json(inst, schedule, t);
                    v["slot"] = json!(t);
                    v
                })
                .collect();
            let doc = json!({
                "instance": inst.name,
                "operational_slots": schedule.operational_slots,
                "slot_hours": schedule.slot_hours,
                "assignment": (0..inst.batch_count())
                    .map(|i| (inst.batch_label(i), product_id(inst, schedule.assignment[i])))
                    .collect::<serde_json::Map<_, _>>(),
                "slots": slots,
                "costs": costs_json(inst, &costs),
            });
            serde_json::to_string_pretty(&doc).expect("json")
        }
        ReportFormat::GanttJson => {
            let dt = schedule.slot_hours;
            let slots: Vec<Value> = schedule
                .snapshots
                .iter()
                .skip(1)
                .map(|snap| {
                    let t = snap.state;
                    let mut v = slot_events_json(inst, schedule, t);
                    v["slot"] = json!(t);
                    v["start_hours"] = json!((t - 1) as f64 * dt);
                    v["end_hours"] = json!(t as f64 * dt);
                    v["segments"] = Value::from(segments(inst, schedule, snap));
                    v
                })
                .collect();
            let doc = json!({
                "instance": inst.name,
                "lines": inst.lines.iter().enumerate().map(|(l, line)| json!({
                    "line": format!("L{}", l + 1),
                    "volume": line.volume,
                })).collect::<Vec<_>>(),
                "initial": schedule.snapshots.first().map(|s| segments(inst, schedule, s)).unwrap_or_default(),
                "slots": slots,
            });
            serde_json::to_string_pretty(&doc).expect("json")
        }
    };
    if !text.ends_with('\n') {
        text.push('\n');
    }
    text.into_bytes()
}

fn render_text(inst: &PipelineInstance, s: &Schedule, c: &CostBreakdown) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "instance {}: {} slots of {} h",
        inst.name, s.operational_slots, s.slot_hours
    );
    let events = s.injections.len() + s.deliveries.len() + s.transfers.len();
    let _ = writeln!(out, "events: {events}");
    for t in 1..=s.operational_slots {
        let inj: Vec<_> = s.injections.iter().filter(|e| e.slot == t).collect();
        let del: Vec<_> = s.deliveries.iter().filter(|e| e.slot == t).collect();
        let tr: Vec<_> = s.transfers.iter().filter(|e| e.slot == t).collect();
        if inj.is_empty() && del.is_empty() && tr.is_empty() {
            continue;
        }
        let _ = writeln!(
            out,
            "slot {t} [{}, {}] h",
            (t - 1) as f64 * s.slot_hours,
            t as f64 * s.slot_hours
        );
        for e in inj {
            let _ = writeln!(
                out,
                "  inject   L{} -> {} {} {:.4} ({:.4}/h)",
                e.line + 1,
                inst.batch_label(e.batch),
                inst.products[e.product].id,
                e.volume,
                e.rate
            );
        }
        for e in tr {
            let _ = writeln!(
                out,
                "  transfer {} L{} -> L{} {:.4}",
                inst.batch_label(e.batch),
                e.from_line + 1,
                e.to_line + 1,
                e.volume
            );
        }
        for e in del {
            let p = e.product.map_or("-", |p| inst.products[p].id.as_str());
            let _ = writeln!(
                out,
                "  deliver  {} -> {} {} {:.4}",
                inst.batch_label(e.batch),
                inst.depot_label(e.depot),
                p,
                e.volume
            );
        }
    }
    let _ = writeln!(out, "costs");
    let _ = writeln!(out, "  pumping    {:.4}", c.pumping);
    let _ = writeln!(out, "  interface  {:.4}", c.interface);
    let _ = writeln!(out, "  backorder  {:.4} ({:.4} units)", c.backorder, c.backorder_volume());
    let _ = writeln!(out, "  total      {:.4}", c.total);
    out
}
