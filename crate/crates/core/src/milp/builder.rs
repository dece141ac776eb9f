//! Constraint generators turning a [`PipelineInstance`] into a [`MilpModel`].
//!
//! Time indexing: state index 0 holds the initial linefill; operational slots
//! are `1..T` and slot `T` is the terminal state, which carries no injection,
//! delivery or transfer variables.

use crate::error::ModelSizeError;
use crate::instance::PipelineInstance;

use super::{Domain, LinConstraint, MilpModel, Sense, VarId, VarRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildLimits {
    pub max_variables: usize,
    pub max_constraints: usize,
}

impl Default for BuildLimits {
    fn default() -> Self {
        Self {
            max_variables: 2_000_000,
            max_constraints: 2_000_000,
        }
    }
}

/// Build the full model with default size limits.
pub fn build(inst: &PipelineInstance) -> Result<MilpModel, ModelSizeError> {
    build_with(inst, BuildLimits::default())
}

pub fn build_with(inst: &PipelineInstance, limits: BuildLimits) -> Result<MilpModel, ModelSizeError> {
    let mut b = Builder::new(inst);
    b.declare_variables();
    if b.model.variables.len() > limits.max_variables {
        return Err(ModelSizeError {
            what: "variables",
            count: b.model.variables.len(),
            cap: limits.max_variables,
        });
    }
    b.add_assignment();
    b.add_coordinates();
    b.add_injection();
    b.add_delivery();
    b.add_transfer();
    b.add_balance();
    b.add_objective();
    if b.model.constraints.len() > limits.max_constraints {
        return Err(ModelSizeError {
            what: "constraints",
            count: b.model.constraints.len(),
            cap: limits.max_constraints,
        });
    }
    Ok(b.model)
}

/// Replace every backorder objective coefficient, leaving rows untouched.
pub fn set_backorder_cost(model: &mut MilpModel, cost: f64) {
    let border: Vec<VarId> = model
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| matches!(v.key, VarRef::Backorder { .. }))
        .map(|(k, _)| VarId(k))
        .collect();
    model.objective.retain(|(v, _)| !border.contains(v));
    model.objective.extend(border.into_iter().map(|v| (v, cost)));
    model.objective.sort_by_key(|(v, _)| *v);
}

/// Restrict injections, deliveries and transfers to multiples of `quantum`,
/// and allow at most one batch per depot and per line boundary in each slot.
/// This mirrors the plan space enumerated by the brute-force oracle.
pub fn add_grid_restriction(model: &mut MilpModel, inst: &PipelineInstance, quantum: f64) {
    let b = Builder::new(inst);
    let mut steps = Vec::new();
    for v in &model.variables {
        let (key, hi) = match v.key {
            VarRef::Injected { batch, line, slot } => {
                let n = &inst.input_nodes[inst.input_node_of_line(line).expect("R without node")];
                (VarRef::GridInjected { batch, line, slot }, n.inject_max)
            }
            VarRef::Delivered { batch, depot, slot } => (
                VarRef::GridDelivered { batch, depot, slot },
                inst.output_nodes[depot].deliver_max,
            ),
            VarRef::Transferred { batch, line, slot } => (VarRef::GridTransferred { batch, line, slot }, inst.transfer_max),
            _ => continue,
        };
        steps.push((v.key, key, (hi / quantum + 1e-9).floor()));
    }
    for (target, key, hi) in steps {
        let name = format!("k{}", model.variables[model.var(&target).unwrap().0].name);
        let k = model.add_var(key, name.clone(), Domain::Integer { lo: 0.0, hi });
        let t = model.var(&target).unwrap();
        model.add_constraint(LinConstraint {
            name: format!("grid_{name}"),
            family: "grid",
            terms: vec![(t, 1.0), (k, -quantum)],
            sense: Sense::Eq,
            rhs: 0.0,
        });
    }
    let tg = inst.time_grid;
    for depot in 0..inst.output_nodes.len() {
        for t in tg.operational() {
            let terms: Vec<(VarId, f64)> = inst.output_nodes[depot]
                .eligible
                .iter()
                .filter_map(|&i| model.var(&VarRef::Receive { batch: i, depot, slot: t }))
                .map(|v| (v, 1.0))
                .collect();
            model.add_constraint(LinConstraint {
                name: format!("grid_single({},{t})", b.depot_tag(depot)),
                family: "grid",
                terms,
                sense: Sense::Le,
                rhs: 1.0,
            });
        }
    }
    for l in 1..inst.lines.len() {
        for t in tg.operational() {
            let terms: Vec<(VarId, f64)> = (0..inst.batch_count())
                .filter_map(|i| model.var(&VarRef::Move { batch: i, line: l, slot: t }))
                .map(|v| (v, 1.0))
                .collect();
            model.add_constraint(LinConstraint {
                name: format!("grid_single(L{},{t})", l + 1),
                family: "grid",
                terms,
                sense: Sense::Le,
                rhs: 1.0,
            });
        }
    }
}

struct Builder<'a> {
    inst: &'a PipelineInstance,
    model: MilpModel,
}

/// Collects terms for one row, merging repeated variables.
struct Row {
    terms: Vec<(VarId, f64)>,
}

impl Row {
    fn new() -> Self {
        Row { terms: Vec::new() }
    }

    fn add(&mut self, v: Option<VarId>, c: f64) -> &mut Self {
        if let Some(v) = v {
            if c != 0.0 {
                match self.terms.iter_mut().find(|(w, _)| *w == v) {
                    Some((_, k)) => *k += c,
                    None => self.terms.push((v, c)),
                }
            }
        }
        self
    }
}

impl<'a> Builder<'a> {
    fn new(inst: &'a PipelineInstance) -> Self {
        Self {
            inst,
            model: MilpModel::new(inst.name.clone()),
        }
    }

    fn pid(&self, p: usize) -> &str {
        &self.inst.products[p].id
    }

    fn depot_tag(&self, depot: usize) -> String {
        self.inst.depot_tag(depot)
    }

    fn v(&self, key: VarRef) -> Option<VarId> {
        self.model.var(&key)
    }

    fn row(&mut self, family: &'static str, name: String, row: &Row, sense: Sense, rhs: f64) {
        self.model.add_constraint(LinConstraint {
            name,
            family,
            terms: row.terms.clone(),
            sense,
            rhs,
        });
    }

    fn nb(&self) -> usize {
        self.inst.batch_count()
    }

    fn nl(&self) -> usize {
        self.inst.lines.len()
    }

    fn np(&self) -> usize {
        self.inst.products.len()
    }

    fn declare_variables(&mut self) {
        let inst = self.inst;
        let (nb, nl, np) = (self.nb(), self.nl(), self.np());
        let tg = inst.time_grid;
        let cont = Domain::Continuous {
            lo: 0.0,
            hi: f64::INFINITY,
        };

        for i in 0..nb {
            for p in 0..np {
                let name = format!("y(I{},{})", i + 1, self.pid(p));
                self.model.add_var(VarRef::Assign { batch: i, product: p }, name, Domain::Binary);
            }
        }
        for n in &inst.input_nodes {
            let l = n.line;
            for &i in &n.eligible {
                for t in tg.operational() {
                    let name = format!("w(I{},L{},{t})", i + 1, l + 1);
                    self.model.add_var(VarRef::Inject { batch: i, line: l, slot: t }, name, Domain::Binary);
                }
            }
        }
        for (k, d) in inst.output_nodes.iter().enumerate() {
            let tag = self.depot_tag(k);
            for &i in &d.eligible {
                for t in tg.operational() {
                    let name = format!("x(I{},{tag},{t})", i + 1);
                    self.model.add_var(VarRef::Receive { batch: i, depot: k, slot: t }, name, Domain::Binary);
                }
            }
        }
        for l in 1..nl {
            for i in 0..nb {
                for t in tg.operational() {
                    let name = format!("u(I{},L{},{t})", i + 1, l + 1);
                    self.model.add_var(VarRef::Move { batch: i, line: l, slot: t }, name, Domain::Binary);
                }
            }
        }
        for i in 0..nb {
            for l in 0..nl {
                for t in tg.states() {
                    let f = format!("F(I{},L{},{t})", i + 1, l + 1);
                    self.model.add_var(VarRef::Coord { batch: i, line: l, state: t }, f, cont);
                    let w = format!("W(I{},L{},{t})", i + 1, l + 1);
                    self.model.add_var(VarRef::Volume { batch: i, line: l, state: t }, w, cont);
                }
            }
        }
        for n in &inst.input_nodes {
            let l = n.line;
            for &i in &n.eligible {
                for t in tg.operational() {
                    let name = format!("R(I{},L{},{t})", i + 1, l + 1);
                    self.model.add_var(VarRef::Injected { batch: i, line: l, slot: t }, name, cont);
                    for p in 0..np {
                        let name = format!("RP(I{},{},L{},{t})", i + 1, self.pid(p), l + 1);
                        self.model.add_var(
                            VarRef::InjectedProduct {
                                batch: i,
                                product: p,
                                line: l,
                                slot: t,
                            },
                            name,
                            cont,
                        );
                    }
                }
            }
        }
        for (k, d) in inst.output_nodes.iter().enumerate() {
            let tag = self.depot_tag(k);
            for &i in &d.eligible {
                for t in tg.operational() {
                    let name = format!("D(I{},{tag},{t})", i + 1);
                    self.model.add_var(VarRef::Delivered { batch: i, depot: k, slot: t }, name, cont);
                    for p in 0..np {
                        let name = format!("DP(I{},{},{tag},{t})", i + 1, self.pid(p));
                        self.model.add_var(
                            VarRef::DeliveredProduct {
                                batch: i,
                                product: p,
                                depot: k,
                                slot: t,
                            },
                            name,
                            cont,
                        );
                    }
                }
            }
        }
        for l in 1..nl {
            for i in 0..nb {
                for t in tg.operational() {
                    let name = format!("S(I{},L{},{t})", i + 1, l + 1);
                    self.model.add_var(VarRef::Transferred { batch: i, line: l, slot: t }, name, cont);
                }
            }
        }
        for p in 0..np {
            for k in 0..inst.output_nodes.len() {
                let name = format!("Border({},{})", self.pid(p), self.depot_tag(k));
                self.model.add_var(VarRef::Backorder { product: p, depot: k }, name, cont);
            }
        }
        for i in 1..nb {
            self.model
                .add_var(VarRef::InterfaceCost { batch: i }, format!("IC(I{})", i + 1), cont);
        }
    }

    /// Product assignment and forbidden sequences.
    fn add_assignment(&mut self) {
        let inst = self.inst;
        let (nb, np) = (self.nb(), self.np());
        for i in 0..nb {
            if let Some(known) = inst.fixed_product(i) {
                for p in 0..np {
                    let mut r = Row::new();
                    r.add(self.v(VarRef::Assign { batch: i, product: p }), 1.0);
                    let rhs = if p == known { 1.0 } else { 0.0 };
                    self.row("fix", format!("fix_y(I{},{})", i + 1, self.pid(p)), &r, Sense::Eq, rhs);
                }
                continue;
            }
            let mut r = Row::new();
            for p in 0..np {
                r.add(self.v(VarRef::Assign { batch: i, product: p }), 1.0);
            }
            let sense = if inst.is_required(i) { Sense::Eq } else { Sense::Le };
            self.row("eq1", format!("eq1(I{})", i + 1), &r, sense, 1.0);
        }
        for i in 1..nb {
            for p in 0..np {
                for q in 0..np {
                    if !inst.forbidden[p][q] {
                        continue;
                    }
                    let mut r = Row::new();
                    r.add(self.v(VarRef::Assign { batch: i - 1, product: p }), 1.0);
                    r.add(self.v(VarRef::Assign { batch: i, product: q }), 1.0);
                    let name = format!("eq2(I{},{},{})", i + 1, self.pid(p), self.pid(q));
                    self.row("eq2", name, &r, Sense::Le, 1.0);
                }
            }
        }
    }

    /// Batch coordinates: stacking, initial position, one-way motion, line
    /// capacity.
    fn add_coordinates(&mut self) {
        let inst = self.inst;
        let (nb, nl) = (self.nb(), self.nl());
        let tg = inst.time_grid;
        for l in 0..nl {
            for i in 0..nb {
                for t in tg.states() {
                    let mut r = Row::new();
                    r.add(self.v(VarRef::Coord { batch: i, line: l, state: t }), 1.0);
                    r.add(self.v(VarRef::Volume { batch: i, line: l, state: t }), -1.0);
                    if i + 1 < nb {
                        r.add(self.v(VarRef::Coord { batch: i + 1, line: l, state: t }), -1.0);
                    }
                    self.row("eq3", format!("eq3(I{},L{},{t})", i + 1, l + 1), &r, Sense::Eq, 0.0);
                }
                let mut r = Row::new();
                r.add(self.v(VarRef::Coord { batch: i, line: l, state: 0 }), 1.0);
                let f0 = inst.initial_coordinate(i, l);
                self.row("eq4", format!("eq4(I{},L{})", i + 1, l + 1), &r, Sense::Eq, f0);
                for t in 1..=tg.slots {
                    let mut r = Row::new();
                    r.add(self.v(VarRef::Coord { batch: i, line: l, state: t - 1 }), 1.0);
                    r.add(self.v(VarRef::Coord { batch: i, line: l, state: t }), -1.0);
                    self.row("eq5", format!("eq5(I{},L{},{t})", i + 1, l + 1), &r, Sense::Le, 0.0);
                }
                for t in tg.states() {
                    let mut r = Row::new();
                    r.add(self.v(VarRef::Coord { batch: i, line: l, state: t }), 1.0);
                    let vl = inst.lines[l].volume;
                    self.row("eq6", format!("eq6(I{},L{},{t})", i + 1, l + 1), &r, Sense::Le, vl);
                }
            }
        }
    }

    /// Injection at input nodes.
    fn add_injection(&mut self) {
        let inst = self.inst;
        let (nb, np) = (self.nb(), self.np());
        let tg = inst.time_grid;
        let dt = tg.slot_hours;

        for n in &inst.input_nodes {
            let l = n.line;
            for t in tg.operational() {
                let mut r = Row::new();
                for &i in &n.eligible {
                    r.add(self.v(VarRef::Inject { batch: i, line: l, slot: t }), 1.0);
                }
                self.row("eq7", format!("eq7(L{},{t})", l + 1), &r, Sense::Le, 1.0);
            }
        }
        if inst.options.force_active_injection || inst.options.exclusive_injection {
            for t in tg.operational() {
                let mut r = Row::new();
                for n in &inst.input_nodes {
                    for &i in &n.eligible {
                        r.add(self.v(VarRef::Inject { batch: i, line: n.line, slot: t }), 1.0);
                    }
                }
                if inst.options.force_active_injection {
                    self.row("eq8", format!("eq8({t})"), &r, Sense::Ge, 1.0);
                }
                if inst.options.exclusive_injection {
                    self.row("exclusive", format!("exclusive({t})"), &r, Sense::Le, 1.0);
                }
            }
        }
        for i in 0..nb {
            if !inst.is_assignable(i) {
                continue;
            }
            let mut r = Row::new();
            for p in 0..np {
                r.add(self.v(VarRef::Assign { batch: i, product: p }), 1.0);
            }
            for n in &inst.input_nodes {
                for t in tg.operational() {
                    r.add(self.v(VarRef::Inject { batch: i, line: n.line, slot: t }), -1.0);
                }
            }
            self.row("eq9", format!("eq9(I{})", i + 1), &r, Sense::Le, 0.0);
        }
        for n in &inst.input_nodes {
            let l = n.line;
            let vl = inst.lines[l].volume;
            for &i in &n.eligible {
                for t in tg.operational() {
                    let w = self.v(VarRef::Inject { batch: i, line: l, slot: t });
                    let rr = self.v(VarRef::Injected { batch: i, line: l, slot: t });
                    let tag = format!("I{},L{},{t}", i + 1, l + 1);

                    let mut r = Row::new();
                    r.add(self.v(VarRef::Coord { batch: i, line: l, state: t }), 1.0);
                    r.add(self.v(VarRef::Volume { batch: i, line: l, state: t }), -1.0);
                    r.add(w, vl);
                    self.row("eq10", format!("eq10({tag})"), &r, Sense::Le, vl);

                    if l > 0 {
                        let vprev = inst.lines[l - 1].volume;
                        let mut r = Row::new();
                        r.add(self.v(VarRef::Coord { batch: i, line: l - 1, state: t }), 1.0);
                        r.add(w, -vprev);
                        self.row("eq11", format!("eq11({tag})"), &r, Sense::Ge, 0.0);
                    }

                    let mut r = Row::new();
                    r.add(rr, 1.0).add(w, -n.inject_min);
                    self.row("eq12", format!("eq12lo({tag})"), &r, Sense::Ge, 0.0);
                    let mut r = Row::new();
                    r.add(rr, 1.0).add(w, -n.inject_max);
                    self.row("eq12", format!("eq12hi({tag})"), &r, Sense::Le, 0.0);

                    let mut r = Row::new();
                    for p in 0..np {
                        r.add(
                            self.v(VarRef::InjectedProduct {
                                batch: i,
                                product: p,
                                line: l,
                                slot: t,
                            }),
                            1.0,
                        );
                    }
                    r.add(rr, -1.0);
                    self.row("eq14", format!("eq14({tag})"), &r, Sense::Eq, 0.0);
                }
            }
            for t in tg.operational() {
                let mut lo = Row::new();
                let mut hi = Row::new();
                for &i in &n.eligible {
                    let rr = self.v(VarRef::Injected { batch: i, line: l, slot: t });
                    lo.add(rr, 1.0).add(self.v(VarRef::Inject { batch: i, line: l, slot: t }), -dt * n.rate_min);
                    hi.add(rr, 1.0);
                }
                self.row("eq13", format!("eq13lo(L{},{t})", l + 1), &lo, Sense::Ge, 0.0);
                self.row("eq13", format!("eq13hi(L{},{t})", l + 1), &hi, Sense::Le, dt * n.rate_max);
            }
        }
        for i in 0..nb {
            if !inst.input_nodes.iter().any(|n| n.eligible.contains(&i)) {
                continue;
            }
            for p in 0..np {
                let mut r = Row::new();
                for n in &inst.input_nodes {
                    for t in tg.operational() {
                        r.add(
                            self.v(VarRef::InjectedProduct {
                                batch: i,
                                product: p,
                                line: n.line,
                                slot: t,
                            }),
                            1.0,
                        );
                    }
                }
                r.add(self.v(VarRef::Assign { batch: i, product: p }), -inst.product_caps[p]);
                self.row("eq15", format!("eq15(I{},{})", i + 1, self.pid(p)), &r, Sense::Le, 0.0);
            }
        }
        for n in &inst.input_nodes {
            for p in 0..np {
                let mut r = Row::new();
                for &i in &n.eligible {
                    for t in tg.operational() {
                        r.add(
                            self.v(VarRef::InjectedProduct {
                                batch: i,
                                product: p,
                                line: n.line,
                                slot: t,
                            }),
                            1.0,
                        );
                    }
                }
                let name = format!("eq16({},L{})", self.pid(p), n.line + 1);
                self.row("eq16", name, &r, Sense::Le, n.inventory[p]);
            }
        }
    }

    /// Deliveries to depots.
    fn add_delivery(&mut self) {
        let inst = self.inst;
        let (nb, np) = (self.nb(), self.np());
        let tg = inst.time_grid;
        for (k, d) in inst.output_nodes.iter().enumerate() {
            let l = d.line;
            let vl = inst.lines[l].volume;
            let sigma = d.offset;
            let dtag = self.depot_tag(k);
            for &i in &d.eligible {
                for t in tg.operational() {
                    let x = self.v(VarRef::Receive { batch: i, depot: k, slot: t });
                    let dd = self.v(VarRef::Delivered { batch: i, depot: k, slot: t });
                    let f = self.v(VarRef::Coord { batch: i, line: l, state: t });
                    // Tail coordinates are taken at the start of the slot.
                    let f0 = self.v(VarRef::Coord { batch: i, line: l, state: t - 1 });
                    let w0 = self.v(VarRef::Volume { batch: i, line: l, state: t - 1 });
                    let tag = format!("I{},{dtag},{t}", i + 1);

                    let mut r = Row::new();
                    r.add(f0, 1.0).add(w0, -1.0).add(x, vl - sigma);
                    self.row("eq17", format!("eq17({tag})"), &r, Sense::Le, vl);

                    let mut r = Row::new();
                    r.add(f, 1.0).add(x, -sigma);
                    self.row("eq18", format!("eq18({tag})"), &r, Sense::Ge, 0.0);

                    let mut r = Row::new();
                    r.add(dd, 1.0).add(x, -d.deliver_min);
                    self.row("eq19", format!("eq19lo({tag})"), &r, Sense::Ge, 0.0);
                    let mut r = Row::new();
                    r.add(dd, 1.0).add(x, -d.deliver_max);
                    self.row("eq19", format!("eq19hi({tag})"), &r, Sense::Le, 0.0);

                    let mut r = Row::new();
                    for k2 in inst.depots_of_line(l) {
                        r.add(self.v(VarRef::Delivered { batch: i, depot: k2, slot: t }), 1.0);
                    }
                    r.add(f0, 1.0).add(w0, -1.0);
                    r.add(self.v(VarRef::Injected { batch: i, line: l, slot: t }), -1.0);
                    r.add(self.v(VarRef::Transferred { batch: i, line: l, slot: t }), -1.0);
                    r.add(x, vl - sigma);
                    self.row("eq20", format!("eq20({tag})"), &r, Sense::Le, vl);

                    let mut r = Row::new();
                    for p in 0..np {
                        r.add(
                            self.v(VarRef::DeliveredProduct {
                                batch: i,
                                product: p,
                                depot: k,
                                slot: t,
                            }),
                            1.0,
                        );
                    }
                    r.add(dd, -1.0);
                    self.row("eq22", format!("eq22({tag})"), &r, Sense::Eq, 0.0);
                }
            }
        }
        for i in 0..nb {
            if !inst.output_nodes.iter().any(|d| d.eligible.contains(&i)) {
                continue;
            }
            for p in 0..np {
                let mut r = Row::new();
                for k in 0..inst.output_nodes.len() {
                    for t in tg.operational() {
                        r.add(
                            self.v(VarRef::DeliveredProduct {
                                batch: i,
                                product: p,
                                depot: k,
                                slot: t,
                            }),
                            1.0,
                        );
                    }
                }
                r.add(self.v(VarRef::Assign { batch: i, product: p }), -inst.product_caps[p]);
                self.row("eq21", format!("eq21(I{},{})", i + 1, self.pid(p)), &r, Sense::Le, 0.0);
            }
        }
        for (k, d) in inst.output_nodes.iter().enumerate() {
            for p in 0..np {
                let mut r = Row::new();
                for &i in &d.eligible {
                    for t in tg.operational() {
                        r.add(
                            self.v(VarRef::DeliveredProduct {
                                batch: i,
                                product: p,
                                depot: k,
                                slot: t,
                            }),
                            1.0,
                        );
                    }
                }
                r.add(self.v(VarRef::Backorder { product: p, depot: k }), 1.0);
                let name = format!("eq23({},{})", self.pid(p), self.depot_tag(k));
                self.row("eq23", name, &r, Sense::Ge, d.demand[p]);
            }
        }
    }

    /// Movement of batches across line boundaries.
    fn add_transfer(&mut self) {
        let inst = self.inst;
        let (nb, nl) = (self.nb(), self.nl());
        let tg = inst.time_grid;
        for l in 1..nl {
            let vl = inst.lines[l].volume;
            let vprev = inst.lines[l - 1].volume;
            for i in 0..nb {
                for t in tg.operational() {
                    let u = self.v(VarRef::Move { batch: i, line: l, slot: t });
                    let s = self.v(VarRef::Transferred { batch: i, line: l, slot: t });
                    let tag = format!("I{},L{},{t}", i + 1, l + 1);

                    let mut r = Row::new();
                    r.add(self.v(VarRef::Coord { batch: i, line: l, state: t - 1 }), 1.0);
                    r.add(self.v(VarRef::Volume { batch: i, line: l, state: t - 1 }), -1.0);
                    r.add(u, vl);
                    self.row("eq24", format!("eq24({tag})"), &r, Sense::Le, vl);

                    let mut r = Row::new();
                    r.add(self.v(VarRef::Coord { batch: i, line: l - 1, state: t }), 1.0);
                    r.add(u, -vprev);
                    self.row("eq25", format!("eq25({tag})"), &r, Sense::Ge, 0.0);

                    let mut r = Row::new();
                    r.add(s, 1.0).add(u, -inst.transfer_min);
                    self.row("eq26", format!("eq26lo({tag})"), &r, Sense::Ge, 0.0);
                    let mut r = Row::new();
                    r.add(s, 1.0).add(u, -inst.transfer_max);
                    self.row("eq26", format!("eq26hi({tag})"), &r, Sense::Le, 0.0);
                }
            }
            for t in tg.operational() {
                let mut r = Row::new();
                for i in 0..nb {
                    r.add(self.v(VarRef::Transferred { batch: i, line: l, slot: t }), 1.0);
                }
                if let Some(n) = inst.input_node_of_line(l) {
                    for &i in &inst.input_nodes[n].eligible {
                        r.add(self.v(VarRef::Inject { batch: i, line: l, slot: t }), inst.transfer_max);
                    }
                }
                self.row("eq27", format!("eq27(L{},{t})", l + 1), &r, Sense::Le, inst.transfer_max);
            }
        }
    }

    /// Per-batch volume recursion, initial volumes, line fullness and flow
    /// conservation.
    fn add_balance(&mut self) {
        let inst = self.inst;
        let (nb, nl) = (self.nb(), self.nl());
        let tg = inst.time_grid;
        for l in 0..nl {
            let depots: Vec<usize> = inst.depots_of_line(l).collect();
            for i in 0..nb {
                for t in 1..=tg.slots {
                    let mut r = Row::new();
                    r.add(self.v(VarRef::Volume { batch: i, line: l, state: t }), 1.0);
                    r.add(self.v(VarRef::Volume { batch: i, line: l, state: t - 1 }), -1.0);
                    r.add(self.v(VarRef::Injected { batch: i, line: l, slot: t }), -1.0);
                    r.add(self.v(VarRef::Transferred { batch: i, line: l, slot: t }), -1.0);
                    r.add(self.v(VarRef::Transferred { batch: i, line: l + 1, slot: t }), 1.0);
                    for &k in &depots {
                        r.add(self.v(VarRef::Delivered { batch: i, depot: k, slot: t }), 1.0);
                    }
                    self.row("eq28", format!("eq28(I{},L{},{t})", i + 1, l + 1), &r, Sense::Eq, 0.0);
                }
                let mut r = Row::new();
                r.add(self.v(VarRef::Volume { batch: i, line: l, state: 0 }), 1.0);
                let w0 = inst.initial_volume(i, l);
                self.row("eq29", format!("eq29(I{},L{})", i + 1, l + 1), &r, Sense::Eq, w0);
            }
            for t in tg.states() {
                let mut r = Row::new();
                for i in 0..nb {
                    r.add(self.v(VarRef::Volume { batch: i, line: l, state: t }), 1.0);
                }
                let vl = inst.lines[l].volume;
                self.row("eq30", format!("eq30(L{},{t})", l + 1), &r, Sense::Eq, vl);
            }
            for t in tg.operational() {
                let mut r = Row::new();
                for i in 0..nb {
                    r.add(self.v(VarRef::Transferred { batch: i, line: l, slot: t }), 1.0);
                    r.add(self.v(VarRef::Injected { batch: i, line: l, slot: t }), 1.0);
                    r.add(self.v(VarRef::Transferred { batch: i, line: l + 1, slot: t }), -1.0);
                    for &k in &depots {
                        r.add(self.v(VarRef::Delivered { batch: i, depot: k, slot: t }), -1.0);
                    }
                }
                self.row("eq31", format!("eq31(L{},{t})", l + 1), &r, Sense::Eq, 0.0);
            }
        }
    }

    /// Objective: pumping + backorder + interface costs.
    fn add_objective(&mut self) {
        let inst = self.inst;
        let (nb, np) = (self.nb(), self.np());
        let scale = inst.options.cost_scale;
        let mut obj = Row::new();
        for n in &inst.input_nodes {
            for &i in &n.eligible {
                for t in inst.time_grid.operational() {
                    for p in 0..np {
                        let v = self.v(VarRef::InjectedProduct {
                            batch: i,
                            product: p,
                            line: n.line,
                            slot: t,
                        });
                        obj.add(v, scale * n.pumping_cost[p]);
                    }
                }
            }
        }
        for (k, d) in inst.output_nodes.iter().enumerate() {
            for p in 0..np {
                obj.add(self.v(VarRef::Backorder { product: p, depot: k }), d.backorder_cost[p]);
            }
        }
        for i in 1..nb {
            let ic = self.v(VarRef::InterfaceCost { batch: i });
            obj.add(ic, scale);
            // `p` trails `q`: batch i carries p, batch i-1 carries q.
            for p in 0..np {
                for q in 0..np {
                    let cost = inst.interface_cost(q, p);
                    if cost <= 0.0 {
                        continue;
                    }
                    let mut r = Row::new();
                    r.add(ic, 1.0);
                    r.add(self.v(VarRef::Assign { batch: i, product: p }), -cost);
                    r.add(self.v(VarRef::Assign { batch: i - 1, product: q }), -cost);
                    let name = format!("eq33(I{},{},{})", i + 1, self.pid(q), self.pid(p));
                    self.row("eq33", name, &r, Sense::Ge, -cost);
                }
            }
        }
        let mut terms = obj.terms;
        terms.sort_by_key(|(v, _)| *v);
        self.model.objective = terms;
    }
}
