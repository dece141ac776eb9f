//! Pipeline scheduling instances: data model, JSON loading, validation.
//!
//! Indices are 0-based in memory. The JSON format and every user-facing label
//! (batches `I1..`, lines `L1..`, depots `D1..` within a line) are 1-based.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{InstanceError, ValidationError};

/// Absolute tolerance used for every volumetric comparison.
pub const VOLUME_TOL: f64 = 1e-6;
/// Absolute tolerance used when comparing monetary amounts.
pub const COST_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Product {
    pub id: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub volume: f64,
}

/// A refinery (or dual-purpose terminal) pumping into the head of one line.
#[derive(Debug, Clone, PartialEq)]
pub struct InputNode {
    pub line: usize,
    /// Per-slot injected volume bounds.
    pub inject_min: f64,
    pub inject_max: f64,
    /// Pumping rate bounds, volume per hour.
    pub rate_min: f64,
    pub rate_max: f64,
    /// Tank inventory per product at the start of the horizon.
    pub inventory: Vec<f64>,
    /// Pumping cost per unit, per product.
    pub pumping_cost: Vec<f64>,
    /// Batches this node may enlarge.
    pub eligible: Vec<usize>,
}

/// A depot drawing product from a line at a fixed volumetric offset.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputNode {
    pub name: String,
    pub line: usize,
    /// Position within the line's depot list.
    pub index: usize,
    pub offset: f64,
    pub deliver_min: f64,
    pub deliver_max: f64,
    pub demand: Vec<f64>,
    pub backorder_cost: Vec<f64>,
    pub dual_purpose: bool,
    pub eligible: Vec<usize>,
}

/// One entry of the initial linefill. `product == None` marks a reserved
/// empty batch whose product is left to the model.
#[derive(Debug, Clone, PartialEq)]
pub struct OldBatch {
    pub product: Option<usize>,
    pub volumes: Vec<f64>,
    pub coordinates: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub slot_hours: f64,
    /// Number of time slots including the terminal one, which carries no
    /// operations.
    pub slots: usize,
    pub horizon_hours: f64,
}

impl TimeGrid {
    pub fn operational_slots(&self) -> usize {
        self.slots.saturating_sub(1)
    }

    /// Operational slot indices, `1..slots`.
    pub fn operational(&self) -> std::ops::Range<usize> {
        1..self.slots
    }

    /// State indices, `0..=slots`.
    pub fn states(&self) -> std::ops::RangeInclusive<usize> {
        0..=self.slots
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelOptions {
    /// At most one input node active per slot over the whole pipeline.
    pub exclusive_injection: bool,
    /// At least one input node active in every operational slot.
    pub force_active_injection: bool,
    /// New batches may stay unassigned instead of requiring a product.
    pub optional_new_batches: bool,
    /// Multiplier turning pumping and interface costs into reporting currency.
    pub cost_scale: f64,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            exclusive_injection: false,
            force_active_injection: true,
            optional_new_batches: false,
            cost_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineInstance {
    pub name: String,
    pub products: Vec<Product>,
    pub lines: Vec<Line>,
    pub input_nodes: Vec<InputNode>,
    pub output_nodes: Vec<OutputNode>,
    pub old_batches: Vec<OldBatch>,
    pub new_batches: usize,
    pub time_grid: TimeGrid,
    /// `forbidden[pred][succ]`: product `succ` may not directly trail `pred`.
    pub forbidden: Vec<Vec<bool>>,
    /// `interface[pred][succ]`: reprocessing cost when `succ` trails `pred`.
    pub interface: Vec<Vec<f64>>,
    pub transfer_min: f64,
    pub transfer_max: f64,
    pub product_caps: Vec<f64>,
    /// Scalar backorder coefficient before per-depot overrides.
    pub backorder_default: f64,
    pub options: ModelOptions,
}

impl PipelineInstance {
    pub fn batch_count(&self) -> usize {
        self.old_batches.len() + self.new_batches
    }

    pub fn is_old(&self, batch: usize) -> bool {
        batch < self.old_batches.len()
    }

    /// Product fixed by the initial linefill, if any.
    pub fn fixed_product(&self, batch: usize) -> Option<usize> {
        self.old_batches.get(batch).and_then(|b| b.product)
    }

    /// Batches whose product is a model decision: new batches plus reserved
    /// empty slots of the linefill.
    pub fn is_assignable(&self, batch: usize) -> bool {
        batch < self.batch_count() && self.fixed_product(batch).is_none()
    }

    /// Assignable batches that must receive a product.
    pub fn is_required(&self, batch: usize) -> bool {
        !self.is_old(batch) && !self.options.optional_new_batches
    }

    pub fn initial_volume(&self, batch: usize, line: usize) -> f64 {
        self.old_batches.get(batch).map_or(0.0, |b| b.volumes[line])
    }

    pub fn initial_coordinate(&self, batch: usize, line: usize) -> f64 {
        match self.old_batches.get(batch) {
            Some(b) => b.coordinates[line],
            None => 0.0,
        }
    }

    pub fn input_node_of_line(&self, line: usize) -> Option<usize> {
        self.input_nodes.iter().position(|n| n.line == line)
    }

    pub fn depots_of_line(&self, line: usize) -> impl Iterator<Item = usize> + '_ {
        self.output_nodes
            .iter()
            .enumerate()
            .filter(move |(_, d)| d.line == line)
            .map(|(k, _)| k)
    }

    pub fn product_index(&self, id: &str) -> Option<usize> {
        self.products.iter().position(|p| p.id == id)
    }

    pub fn depot_label(&self, depot: usize) -> String {
        let d = &self.output_nodes[depot];
        format!("{}/L{}", d.name, d.line + 1)
    }

    /// Compact depot identifier used in variable names and plans, e.g. `L2D1`.
    pub fn depot_tag(&self, depot: usize) -> String {
        let d = &self.output_nodes[depot];
        format!("L{}D{}", d.line + 1, d.index + 1)
    }

    pub fn depot_by_tag(&self, tag: &str) -> Option<usize> {
        (0..self.output_nodes.len()).find(|&k| self.depot_tag(k) == tag)
    }

    pub fn interface_cost(&self, pred: usize, succ: usize) -> f64 {
        self.interface[pred][succ]
    }

    pub fn total_demand(&self) -> f64 {
        self.output_nodes.iter().flat_map(|d| d.demand.iter()).sum()
    }

    /// Overwrite every backorder coefficient with one scalar.
    pub fn set_backorder_cost(&mut self, cost: f64) {
        self.backorder_default = cost;
        for d in &mut self.output_nodes {
            d.backorder_cost.iter_mut().for_each(|c| *c = cost);
        }
    }

    /// Same instance with a different number of operational slots; the
    /// horizon follows.
    pub fn with_operational_slots(&self, operational: usize) -> Self {
        let mut inst = self.clone();
        inst.time_grid.slots = operational + 1;
        inst.time_grid.horizon_hours = inst.time_grid.slot_hours * operational as f64;
        inst
    }
}

/// Compute the upper coordinates implied by a linefill's per-line volumes:
/// the coordinate of batch `i` is its own volume plus that of every batch
/// behind it.
pub fn coordinates_from_volumes(volumes: &[Vec<f64>], lines: usize) -> Vec<Vec<f64>> {
    let mut coords = vec![vec![0.0; lines]; volumes.len()];
    for l in 0..lines {
        let mut acc = 0.0;
        for i in (0..volumes.len()).rev() {
            acc += volumes[i][l];
            coords[i][l] = acc;
        }
    }
    coords
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.findings.push(Finding {
            path: path.into(),
            message: message.into(),
        });
    }

    pub fn contains(&self, message: &str) -> bool {
        self.findings.iter().any(|f| f.message.contains(message))
    }
}

fn finite_nonneg(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

/// Check every structural and linefill invariant of an instance.
pub fn validate_instance(inst: &PipelineInstance) -> ValidationReport {
    let mut rep = ValidationReport::default();
    let np = inst.products.len();
    let nl = inst.lines.len();
    let nb = inst.batch_count();

    if np == 0 {
        rep.push("products", "at least one product is required");
    }
    for (k, p) in inst.products.iter().enumerate() {
        if p.id.is_empty() || !p.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            rep.push(format!("products[{k}].id"), "id must be non-empty ASCII alphanumeric");
        }
        if inst.products[..k].iter().any(|q| q.id == p.id) {
            rep.push(format!("products[{k}].id"), format!("duplicate product id {}", p.id));
        }
    }
    if nl == 0 {
        rep.push("lines", "at least one line is required");
    }
    for (l, line) in inst.lines.iter().enumerate() {
        if !(line.volume.is_finite() && line.volume > 0.0) {
            rep.push(format!("lines[{l}].volume"), "line volume must be positive");
        }
    }

    for (k, n) in inst.input_nodes.iter().enumerate() {
        let path = format!("input_nodes[{k}]");
        if n.line >= nl {
            rep.push(format!("{path}.line"), "line index out of range");
        }
        if inst.input_nodes[..k].iter().any(|m| m.line == n.line) {
            rep.push(format!("{path}.line"), "line already has an input node");
        }
        if !(finite_nonneg(n.inject_min) && n.inject_min <= n.inject_max && n.inject_max.is_finite()) {
            rep.push(format!("{path}.r_min"), "injection bounds must satisfy 0 <= r_min <= r_max");
        }
        if !(finite_nonneg(n.rate_min) && n.rate_min <= n.rate_max && n.rate_max.is_finite()) {
            rep.push(format!("{path}.vr_min"), "rate bounds must satisfy 0 <= vr_min <= vr_max");
        }
        if n.inventory.len() != np || n.inventory.iter().any(|&v| !finite_nonneg(v)) {
            rep.push(format!("{path}.inventory"), "inventories must be non-negative");
        }
        if n.pumping_cost.len() != np || n.pumping_cost.iter().any(|&v| !finite_nonneg(v)) {
            rep.push(format!("{path}.pumping_cost"), "pumping costs must be non-negative");
        }
        if n.eligible.iter().any(|&i| i >= nb) {
            rep.push(format!("{path}.eligible_batches"), "batch index out of range");
        }
    }

    for (k, d) in inst.output_nodes.iter().enumerate() {
        let path = format!("output_nodes[{k}]");
        if d.line >= nl {
            rep.push(format!("{path}.line"), "line index out of range");
            continue;
        }
        let vl = inst.lines[d.line].volume;
        if !(d.offset > 0.0 && d.offset <= vl + VOLUME_TOL) {
            rep.push(format!("{path}.offset"), "offset must lie in (0, line volume]");
        }
        if !(finite_nonneg(d.deliver_min) && d.deliver_min <= d.deliver_max && d.deliver_max.is_finite()) {
            rep.push(format!("{path}.d_min"), "delivery bounds must satisfy 0 <= d_min <= d_max");
        }
        if d.demand.len() != np || d.demand.iter().any(|&v| !finite_nonneg(v)) {
            rep.push(format!("{path}.demand"), "demands must be non-negative");
        }
        if d.backorder_cost.len() != np || d.backorder_cost.iter().any(|&v| !finite_nonneg(v)) {
            rep.push(format!("{path}.backorder_cost"), "backorder costs must be non-negative");
        }
        if d.eligible.iter().any(|&i| i >= nb) {
            rep.push(format!("{path}.eligible_batches"), "batch index out of range");
        }
    }
    for l in 0..nl {
        let depots: Vec<&OutputNode> = inst.output_nodes.iter().filter(|d| d.line == l).collect();
        for (pos, d) in depots.iter().enumerate() {
            if d.index != pos {
                rep.push(
                    format!("output_nodes[{}]", d.name),
                    "depot indices must be contiguous within a line",
                );
            }
            if pos > 0 && d.offset <= depots[pos - 1].offset {
                rep.push(
                    format!("output_nodes[{}].offset", d.name),
                    "offsets must be strictly increasing within a line",
                );
            }
        }
    }

    // Linefill
    for (i, b) in inst.old_batches.iter().enumerate() {
        let path = format!("initial_linefill[{i}]");
        if b.volumes.len() != nl || b.coordinates.len() != nl {
            rep.push(path, "one volume and one coordinate per line expected");
            continue;
        }
        if b.volumes.iter().any(|&v| !finite_nonneg(v)) {
            rep.push(format!("{path}.volumes"), "volumes must be non-negative");
        }
        if b.product.is_none() && b.volumes.iter().any(|&v| v > VOLUME_TOL) {
            rep.push(format!("{path}.volumes"), "empty batch must have zero volume");
        }
        if b.product.is_some_and(|p| p >= np) {
            rep.push(format!("{path}.product"), "product out of range");
        }
    }
    if inst.old_batches.iter().all(|b| b.volumes.len() == nl && b.coordinates.len() == nl) {
        for (l, line) in inst.lines.iter().enumerate() {
            let total: f64 = inst.old_batches.iter().map(|b| b.volumes[l]).sum();
            if (total - line.volume).abs() > VOLUME_TOL {
                rep.push(
                    format!("initial_linefill.line[{}]", l + 1),
                    format!("linefill not full: volumes sum to {total} but line volume is {}", line.volume),
                );
            }
            for (i, b) in inst.old_batches.iter().enumerate() {
                let behind = inst.old_batches.get(i + 1).map_or(0.0, |n| n.coordinates[l]);
                if (b.coordinates[l] - (b.volumes[l] + behind)).abs() > VOLUME_TOL {
                    rep.push(
                        format!("initial_linefill[{i}].coordinates[{l}]"),
                        "coordinate inconsistent with volumes of trailing batches",
                    );
                }
                if b.coordinates[l] > line.volume + VOLUME_TOL {
                    rep.push(
                        format!("initial_linefill[{i}].coordinates[{l}]"),
                        "coordinate exceeds line volume",
                    );
                }
            }
        }
        // Adjacent assigned batches physically touching in the linefill.
        let assigned: Vec<(usize, usize)> = inst
            .old_batches
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.product.map(|p| (i, p)))
            .collect();
        for w in assigned.windows(2) {
            let ((i, p), (j, q)) = (w[0], w[1]);
            if j == i + 1 && p < np && q < np && inst.forbidden.get(p).is_some_and(|r| r.get(q) == Some(&true)) {
                rep.push(
                    format!("initial_linefill[{j}]"),
                    format!(
                        "forbidden initial adjacency {} -> {}",
                        inst.products[p].id, inst.products[q].id
                    ),
                );
            }
        }
    }

    let tg = &inst.time_grid;
    if !(tg.slot_hours.is_finite() && tg.slot_hours > 0.0) {
        rep.push("time_grid.slot_hours", "slot length must be positive");
    }
    if tg.slots < 2 {
        rep.push("time_grid.slots", "at least two slots are required");
    }
    if (tg.horizon_hours - tg.slot_hours * tg.operational_slots() as f64).abs() > 1e-9 * tg.horizon_hours.max(1.0) {
        rep.push(
            "time_grid.horizon_hours",
            "horizon must equal slot length times operational slots",
        );
    }

    if inst.forbidden.len() != np || inst.forbidden.iter().any(|r| r.len() != np) {
        rep.push("forbidden_pairs", "forbidden matrix must be square over products");
    }
    if inst.interface.len() != np
        || inst.interface.iter().any(|r| r.len() != np || r.iter().any(|&c| !finite_nonneg(c)))
    {
        rep.push("interface_costs", "interface costs must be non-negative");
    }
    if !(finite_nonneg(inst.transfer_min) && inst.transfer_min <= inst.transfer_max && inst.transfer_max.is_finite()) {
        rep.push("transfer_bounds", "transfer bounds must satisfy 0 <= S_min <= S_max");
    }
    if inst.product_caps.len() != np || inst.product_caps.iter().any(|&c| !finite_nonneg(c)) {
        rep.push("product_caps", "product caps must be non-negative");
    }
    if !finite_nonneg(inst.backorder_default) {
        rep.push("backorder_cost", "backorder cost must be non-negative");
    }
    if !(inst.options.cost_scale.is_finite() && inst.options.cost_scale > 0.0) {
        rep.push("options.cost_scale", "cost scale must be positive");
    }
    rep
}

// ---------------------------------------------------------------------------
// JSON document
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductDoc {
    pub id: String,
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineDoc {
    pub index: usize,
    pub volume: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputNodeDoc {
    pub line: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub vr_min: f64,
    pub vr_max: f64,
    #[serde(default)]
    pub inventory: BTreeMap<String, f64>,
    #[serde(default)]
    pub pumping_cost: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eligible_batches: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputNodeDoc {
    pub name: String,
    pub line: usize,
    pub index: usize,
    pub offset: f64,
    pub d_min: f64,
    pub d_max: f64,
    #[serde(default)]
    pub demand: BTreeMap<String, f64>,
    #[serde(default)]
    pub dual_purpose: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eligible_batches: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinefillDoc {
    pub batch: usize,
    pub product: Option<String>,
    pub volumes: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinates: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGridDoc {
    pub slot_hours: f64,
    pub slots: usize,
    pub horizon_hours: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferBoundsDoc {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackorderOverrideDoc {
    pub product: String,
    pub line: usize,
    pub depot: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BackorderDoc {
    Scalar(f64),
    Detailed {
        default: f64,
        #[serde(default)]
        overrides: Vec<BackorderOverrideDoc>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsDoc {
    #[serde(default)]
    pub exclusive_injection: bool,
    #[serde(default = "default_true")]
    pub force_active_injection: bool,
    #[serde(default)]
    pub optional_new_batches: bool,
    #[serde(default = "default_one")]
    pub cost_scale: f64,
}

impl Default for OptionsDoc {
    fn default() -> Self {
        let o = ModelOptions::default();
        Self {
            exclusive_injection: o.exclusive_injection,
            force_active_injection: o.force_active_injection,
            optional_new_batches: o.optional_new_batches,
            cost_scale: o.cost_scale,
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_one() -> f64 {
    1.0
}

/// Serialized form of a [`PipelineInstance`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    #[serde(default)]
    pub name: String,
    pub products: Vec<ProductDoc>,
    pub lines: Vec<LineDoc>,
    pub input_nodes: Vec<InputNodeDoc>,
    pub output_nodes: Vec<OutputNodeDoc>,
    pub initial_linefill: Vec<LinefillDoc>,
    pub new_batches: usize,
    pub time_grid: TimeGridDoc,
    #[serde(default)]
    pub forbidden_pairs: Vec<[String; 2]>,
    /// predecessor -> successor -> cost
    #[serde(default)]
    pub interface_costs: BTreeMap<String, BTreeMap<String, f64>>,
    pub transfer_bounds: TransferBoundsDoc,
    #[serde(default)]
    pub product_caps: BTreeMap<String, f64>,
    pub backorder_cost: BackorderDoc,
    #[serde(default)]
    pub options: OptionsDoc,
}

fn product_lookup(ids: &[String], id: &str, path: &str) -> Result<usize, ValidationError> {
    ids.iter()
        .position(|p| p == id)
        .ok_or_else(|| ValidationError::new(path, format!("unknown product `{id}`")))
}

fn per_product(
    ids: &[String],
    map: &BTreeMap<String, f64>,
    path: &str,
    default: f64,
) -> Result<Vec<f64>, ValidationError> {
    let mut out = vec![default; ids.len()];
    for (k, v) in map {
        out[product_lookup(ids, k, path)?] = *v;
    }
    Ok(out)
}

fn batch_set(
    list: &Option<Vec<usize>>,
    nb: usize,
    path: &str,
) -> Result<Vec<usize>, ValidationError> {
    match list {
        None => Ok((0..nb).collect()),
        Some(v) => {
            let mut out = Vec::with_capacity(v.len());
            for &b in v {
                if b == 0 || b > nb {
                    return Err(ValidationError::new(path, format!("batch {b} out of range 1..={nb}")));
                }
                out.push(b - 1);
            }
            out.sort_unstable();
            out.dedup();
            Ok(out)
        }
    }
}

impl InstanceDoc {
    /// Convert into an instance, resolving ids and applying defaults. Only
    /// structural problems are reported here; invariants are checked by
    /// [`validate_instance`].
    pub fn into_instance(self) -> Result<PipelineInstance, ValidationError> {
        let ids: Vec<String> = self.products.iter().map(|p| p.id.clone()).collect();
        let np = ids.len();
        let products = self
            .products
            .iter()
            .map(|p| Product {
                id: p.id.clone(),
                name: p.name.clone().unwrap_or_else(|| p.id.clone()),
            })
            .collect();

        let mut lines = Vec::with_capacity(self.lines.len());
        for (k, l) in self.lines.iter().enumerate() {
            if l.index != k + 1 {
                return Err(ValidationError::new(
                    format!("lines[{k}].index"),
                    "lines must be listed in order with 1-based indices",
                ));
            }
            lines.push(Line { volume: l.volume });
        }
        let nl = lines.len();
        let nb = self.initial_linefill.len() + self.new_batches;

        let line_index = |l: usize, path: String| -> Result<usize, ValidationError> {
            if l == 0 || l > nl {
                Err(ValidationError::new(path, format!("line {l} out of range 1..={nl}")))
            } else {
                Ok(l - 1)
            }
        };

        let mut input_nodes = Vec::new();
        for (k, n) in self.input_nodes.iter().enumerate() {
            let path = format!("input_nodes[{k}]");
            input_nodes.push(InputNode {
                line: line_index(n.line, format!("{path}.line"))?,
                inject_min: n.r_min,
                inject_max: n.r_max,
                rate_min: n.vr_min,
                rate_max: n.vr_max,
                inventory: per_product(&ids, &n.inventory, &format!("{path}.inventory"), 0.0)?,
                pumping_cost: per_product(&ids, &n.pumping_cost, &format!("{path}.pumping_cost"), 0.0)?,
                eligible: batch_set(&n.eligible_batches, nb, &format!("{path}.eligible_batches"))?,
            });
        }

        let (bo_default, overrides) = match &self.backorder_cost {
            BackorderDoc::Scalar(c) => (*c, Vec::new()),
            BackorderDoc::Detailed { default, overrides } => (*default, overrides.clone()),
        };

        let mut output_nodes = Vec::new();
        for (k, d) in self.output_nodes.iter().enumerate() {
            let path = format!("output_nodes[{k}]");
            if d.index == 0 {
                return Err(ValidationError::new(format!("{path}.index"), "depot index is 1-based"));
            }
            output_nodes.push(OutputNode {
                name: d.name.clone(),
                line: line_index(d.line, format!("{path}.line"))?,
                index: d.index - 1,
                offset: d.offset,
                deliver_min: d.d_min,
                deliver_max: d.d_max,
                demand: per_product(&ids, &d.demand, &format!("{path}.demand"), 0.0)?,
                backorder_cost: vec![bo_default; np],
                dual_purpose: d.dual_purpose,
                eligible: batch_set(&d.eligible_batches, nb, &format!("{path}.eligible_batches"))?,
            });
        }
        for (k, o) in overrides.iter().enumerate() {
            let path = format!("backorder_cost.overrides[{k}]");
            let p = product_lookup(&ids, &o.product, &path)?;
            let line = line_index(o.line, format!("{path}.line"))?;
            let depot = output_nodes
                .iter_mut()
                .find(|d| d.line == line && d.index + 1 == o.depot)
                .ok_or_else(|| ValidationError::new(&path, "no such depot"))?;
            depot.backorder_cost[p] = o.cost;
        }

        let mut old_batches = Vec::new();
        for (k, b) in self.initial_linefill.iter().enumerate() {
            let path = format!("initial_linefill[{k}]");
            if b.batch != k + 1 {
                return Err(ValidationError::new(
                    format!("{path}.batch"),
                    "batch indices must form a contiguous 1-based sequence",
                ));
            }
            if b.volumes.len() != nl {
                return Err(ValidationError::new(format!("{path}.volumes"), "one volume per line expected"));
            }
            let product = match &b.product {
                None => None,
                Some(id) => Some(product_lookup(&ids, id, &format!("{path}.product"))?),
            };
            old_batches.push(OldBatch {
                product,
                volumes: b.volumes.clone(),
                coordinates: Vec::new(),
            });
        }
        let vols: Vec<Vec<f64>> = old_batches.iter().map(|b| b.volumes.clone()).collect();
        let derived = coordinates_from_volumes(&vols, nl);
        for (k, b) in self.initial_linefill.iter().enumerate() {
            old_batches[k].coordinates = match &b.coordinates {
                Some(c) if c.len() == nl => c.clone(),
                Some(_) => {
                    return Err(ValidationError::new(
                        format!("initial_linefill[{k}].coordinates"),
                        "one coordinate per line expected",
                    ))
                }
                None => derived[k].clone(),
            };
        }

        let mut forbidden = vec![vec![false; np]; np];
        for (k, [a, b]) in self.forbidden_pairs.iter().enumerate() {
            let path = format!("forbidden_pairs[{k}]");
            forbidden[product_lookup(&ids, a, &path)?][product_lookup(&ids, b, &path)?] = true;
        }
        let mut interface = vec![vec![0.0; np]; np];
        for (pred, row) in &self.interface_costs {
            let p = product_lookup(&ids, pred, "interface_costs")?;
            for (succ, c) in row {
                interface[p][product_lookup(&ids, succ, "interface_costs")?] = *c;
            }
        }

        // Default cap: everything of that product that could ever be in the
        // pipeline.
        let mut default_caps = vec![0.0; np];
        for n in &input_nodes {
            for (p, v) in n.inventory.iter().enumerate() {
                default_caps[p] += v;
            }
        }
        for b in &old_batches {
            if let Some(p) = b.product {
                default_caps[p] += b.volumes.iter().sum::<f64>();
            }
        }
        let mut product_caps = default_caps;
        for (k, v) in &self.product_caps {
            product_caps[product_lookup(&ids, k, "product_caps")?] = *v;
        }

        Ok(PipelineInstance {
            name: self.name,
            products,
            lines,
            input_nodes,
            output_nodes,
            old_batches,
            new_batches: self.new_batches,
            time_grid: TimeGrid {
                slot_hours: self.time_grid.slot_hours,
                slots: self.time_grid.slots,
                horizon_hours: self.time_grid.horizon_hours,
            },
            forbidden,
            interface,
            transfer_min: self.transfer_bounds.min,
            transfer_max: self.transfer_bounds.max,
            product_caps,
            backorder_default: bo_default,
            options: ModelOptions {
                exclusive_injection: self.options.exclusive_injection,
                force_active_injection: self.options.force_active_injection,
                optional_new_batches: self.options.optional_new_batches,
                cost_scale: self.options.cost_scale,
            },
        })
    }

    pub fn from_instance(inst: &PipelineInstance) -> Self {
        let ids: Vec<&str> = inst.products.iter().map(|p| p.id.as_str()).collect();
        let nb = inst.batch_count();
        let map = |v: &[f64]| -> BTreeMap<String, f64> {
            v.iter()
                .enumerate()
                .filter(|(_, x)| **x != 0.0)
                .map(|(p, x)| (ids[p].to_string(), *x))
                .collect()
        };
        let set = |v: &[usize]| -> Option<Vec<usize>> {
            if v.len() == nb && v.iter().enumerate().all(|(k, &b)| k == b) {
                None
            } else {
                Some(v.iter().map(|b| b + 1).collect())
            }
        };
        let mut overrides = Vec::new();
        for d in &inst.output_nodes {
            for (p, &c) in d.backorder_cost.iter().enumerate() {
                if c != inst.backorder_default {
                    overrides.push(BackorderOverrideDoc {
                        product: ids[p].to_string(),
                        line: d.line + 1,
                        depot: d.index + 1,
                        cost: c,
                    });
                }
            }
        }
        let backorder_cost = if overrides.is_empty() {
            BackorderDoc::Scalar(inst.backorder_default)
        } else {
            BackorderDoc::Detailed {
                default: inst.backorder_default,
                overrides,
            }
        };
        let mut forbidden_pairs = Vec::new();
        let mut interface_costs = BTreeMap::new();
        for (a, row) in inst.forbidden.iter().enumerate() {
            for (b, &f) in row.iter().enumerate() {
                if f {
                    forbidden_pairs.push([ids[a].to_string(), ids[b].to_string()]);
                }
            }
        }
        for (a, row) in inst.interface.iter().enumerate() {
            let r: BTreeMap<String, f64> = row
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(b, c)| (ids[b].to_string(), *c))
                .collect();
            if !r.is_empty() {
                interface_costs.insert(ids[a].to_string(), r);
            }
        }
        InstanceDoc {
            name: inst.name.clone(),
            products: inst
                .products
                .iter()
                .map(|p| ProductDoc {
                    id: p.id.clone(),
                    name: Some(p.name.clone()),
                })
                .collect(),
            lines: inst
                .lines
                .iter()
                .enumerate()
                .map(|(k, l)| LineDoc {
                    index: k + 1,
                    volume: l.volume,
                })
                .collect(),
            input_nodes: inst
                .input_nodes
                .iter()
                .map(|n| InputNodeDoc {
                    line: n.line + 1,
                    r_min: n.inject_min,
                    r_max: n.inject_max,
                    vr_min: n.rate_min,
                    vr_max: n.rate_max,
                    inventory: map(&n.inventory),
                    pumping_cost: map(&n.pumping_cost),
                    eligible_batches: set(&n.eligible),
                })
                .collect(),
            output_nodes: inst
                .output_nodes
                .iter()
                .map(|d| OutputNodeDoc {
                    name: d.name.clone(),
                    line: d.line + 1,
                    index: d.index + 1,
                    offset: d.offset,
                    d_min: d.deliver_min,
                    d_max: d.deliver_max,
                    demand: map(&d.demand),
                    dual_purpose: d.dual_purpose,
                    eligible_batches: set(&d.eligible),
                })
                .collect(),
            initial_linefill: inst
                .old_batches
                .iter()
                .enumerate()
                .map(|(k, b)| LinefillDoc {
                    batch: k + 1,
                    product: b.product.map(|p| ids[p].to_string()),
                    volumes: b.volumes.clone(),
                    coordinates: Some(b.coordinates.clone()),
                })
                .collect(),
            new_batches: inst.new_batches,
            time_grid: TimeGridDoc {
                slot_hours: inst.time_grid.slot_hours,
                slots: inst.time_grid.slots,
                horizon_hours: inst.time_grid.horizon_hours,
            },
            forbidden_pairs,
            interface_costs,
            transfer_bounds: TransferBoundsDoc {
                min: inst.transfer_min,
                max: inst.transfer_max,
            },
            product_caps: inst
                .product_caps
                .iter()
                .enumerate()
                .map(|(p, c)| (ids[p].to_string(), *c))
                .collect(),
            backorder_cost,
            options: OptionsDoc {
                exclusive_injection: inst.options.exclusive_injection,
                force_active_injection: inst.options.force_active_injection,
                optional_new_batches: inst.options.optional_new_batches,
                cost_scale: inst.options.cost_scale,
            },
        }
    }
}

/// Parse and validate a JSON instance document.
pub fn load_instance(bytes: &[u8]) -> Result<PipelineInstance, InstanceError> {
    let doc: InstanceDoc = serde_json::from_slice(bytes).map_err(InstanceError::Parse)?;
    let inst = doc.into_instance()?;
    let report = validate_instance(&inst);
    if let Some(first) = report.findings.first() {
        return Err(ValidationError::new(&first.path, &first.message).into());
    }
    Ok(inst)
}

/// Pretty-printed JSON for an instance.
pub fn serialize_instance(inst: &PipelineInstance) -> String {
    let doc = InstanceDoc::from_instance(inst);
    let mut s = serde_json::to_string_pretty(&doc).expect("instance documents always serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{builtin_instance, BuiltinName};

    fn example1_json() -> String {
        serialize_instance(&builtin_instance(BuiltinName::Example1))
    }

    #[test]
    fn example1_loads_with_expected_topology() {
        let inst = load_instance(example1_json().as_bytes()).unwrap();
        assert_eq!(inst.input_nodes.len(), 2);
        assert_eq!(inst.output_nodes.len(), 3);
        assert_eq!(inst.products.len(), 3);
    }

    #[test]
    fn underfilled_line_is_rejected() {
        let mut doc: serde_json::Value = serde_json::from_str(&example1_json()).unwrap();
        let fill = doc["initial_linefill"].as_array_mut().unwrap();
        // Shrink the last batch sitting in line 1 by one unit.
        let last = fill.iter_mut().rev().find(|b| b["volumes"][0].as_f64().unwrap() > 0.0).unwrap();
        let v = last["volumes"][0].as_f64().unwrap();
        last["volumes"][0] = serde_json::json!(v - 1.0);
        for b in fill.iter_mut() {
            b.as_object_mut().unwrap().remove("coordinates");
        }
        let err = load_instance(doc.to_string().as_bytes()).unwrap_err();
        assert!(matches!(err, InstanceError::Validation(ref e) if e.message.contains("linefill not full")), "{err}");
    }

    #[test]
    fn zero_offset_is_rejected() {
        let mut doc: serde_json::Value = serde_json::from_str(&example1_json()).unwrap();
        doc["output_nodes"][0]["offset"] = serde_json::json!(0.0);
        let err = load_instance(doc.to_string().as_bytes()).unwrap_err();
        match err {
            InstanceError::Validation(e) => assert_eq!(e.path, "output_nodes[0].offset"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(load_instance(b"{ not json"), Err(InstanceError::Parse(_))));
        assert!(matches!(load_instance(b"{\"products\": []}"), Err(InstanceError::Parse(_))));
    }

    #[test]
    fn unknown_product_reference_names_the_field() {
        let mut doc: serde_json::Value = serde_json::from_str(&example1_json()).unwrap();
        doc["output_nodes"][1]["demand"]["Z"] = serde_json::json!(3.0);
        match load_instance(doc.to_string().as_bytes()).unwrap_err() {
            InstanceError::Validation(e) => {
                assert_eq!(e.path, "output_nodes[1].demand");
                assert!(e.message.contains('Z'));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn scalar_backorder_expands_and_overrides_apply() {
        let mut doc: serde_json::Value = serde_json::from_str(&example1_json()).unwrap();
        doc["backorder_cost"] = serde_json::json!({
            "default": 7.0,
            "overrides": [{"product": "C", "line": 2, "depot": 1, "cost": 9.0}]
        });
        let inst = load_instance(doc.to_string().as_bytes()).unwrap();
        let c = inst.product_index("C").unwrap();
        for d in &inst.output_nodes {
            for (p, &cost) in d.backorder_cost.iter().enumerate() {
                let expect = if p == c && d.line == 1 && d.index == 0 { 9.0 } else { 7.0 };
                assert_eq!(cost, expect);
            }
        }
        let again = load_instance(serialize_instance(&inst).as_bytes()).unwrap();
        assert_eq!(again, inst);
    }

    #[test]
    fn eligibility_defaults_to_every_batch() {
        let inst = builtin_instance(BuiltinName::Example1);
        let nb = inst.batch_count();
        for d in &inst.output_nodes {
            assert_eq!(d.eligible, (0..nb).collect::<Vec<_>>());
        }
    }

    #[test]
    fn example1_validates_clean() {
        let rep = validate_instance(&builtin_instance(BuiltinName::Example1));
        assert!(rep.is_empty(), "{:?}", rep.findings);
    }

    #[test]
    fn forbidden_adjacency_in_linefill_is_reported() {
        let mut inst = builtin_instance(BuiltinName::Example1);
        let b = inst.product_index("B").unwrap();
        let a = inst.product_index("A").unwrap();
        // I1 (B) is trailed by I2 (A).
        inst.forbidden[b][a] = true;
        let rep = validate_instance(&inst);
        assert!(rep.contains("forbidden initial adjacency"), "{:?}", rep.findings);
    }

    #[test]
    fn coordinate_beyond_line_volume_is_reported() {
        let mut inst = builtin_instance(BuiltinName::Example1);
        inst.old_batches[0].coordinates[1] = inst.lines[1].volume + 5.0;
        let rep = validate_instance(&inst);
        assert!(rep.contains("coordinate exceeds line volume"), "{:?}", rep.findings);
    }

    #[test]
    fn horizon_must_match_grid() {
        let mut inst = builtin_instance(BuiltinName::Example2);
        inst.time_grid.horizon_hours += 1.0;
        assert!(validate_instance(&inst).contains("horizon"));
    }

    #[test]
    fn with_operational_slots_adjusts_horizon() {
        let m = builtin_instance(BuiltinName::Motivating).with_operational_slots(4);
        assert_eq!(m.time_grid.slots, 5);
        assert_eq!(m.time_grid.horizon_hours, 40.0);
        assert!(validate_instance(&m).is_empty());
    }
}
