//! Exhaustive search over grid-restricted plans.
//!
//! Every volume is a positive multiple of the quantum. In each slot a node
//! enlarges at most one batch, a depot receives from at most one batch and at
//! most one batch crosses each line boundary. Candidates are generated line
//! by line so that only decisions conserving flow in every line are visited.
//! Enumeration order is fixed (slots ascending; per decision "idle" first,
//! then batch, product and volume ascending), and only a strictly cheaper plan
//! replaces the incumbent, so cost ties resolve to the first plan in that
//! order.

use crate::error::SearchError;
use crate::instance::PipelineInstance;

use super::check::{check_upto, plan_cost};
use super::{ResolvedPlan, ResolvedSlot};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchLimits {
    /// Maximum number of slot decisions examined.
    pub max_candidates: u64,
}

impl Default for SearchLimits {
    fn default() -> Self {
        Self {
            max_candidates: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    /// `None` when no grid plan passes every rule.
    pub best: Option<(ResolvedPlan, f64)>,
    pub candidates: u64,
    pub feasible_plans: u64,
}

fn commensurate(x: f64, q: f64) -> bool {
    let k = x / q;
    (k - k.round()).abs() < 1e-9
}

/// Positive multiples of `q` within `[lo, hi]`.
fn grid(lo: f64, hi: f64, q: f64) -> Vec<f64> {
    let first = ((lo / q) - 1e-9).ceil().max(1.0) as i64;
    let last = ((hi / q) + 1e-9).floor() as i64;
    (first..=last).map(|k| k as f64 * q).collect()
}

/// Minimum-cost plan among all grid plans that pass [`super::check`].
pub fn brute_force_optimize(
    inst: &PipelineInstance,
    quantum: f64,
    limits: SearchLimits,
) -> Result<BruteForceResult, SearchError> {
    if !(quantum > 0.0 && quantum.is_finite()) {
        return Err(SearchError::NotCommensurate {
            quantum,
            what: "quantum must be positive".into(),
        });
    }
    let mut geometry: Vec<(String, f64)> = Vec::new();
    for (l, line) in inst.lines.iter().enumerate() {
        geometry.push((format!("volume of L{}", l + 1), line.volume));
    }
    for (k, d) in inst.output_nodes.iter().enumerate() {
        geometry.push((format!("offset of {}", inst.depot_tag(k)), d.offset));
    }
    for (i, b) in inst.old_batches.iter().enumerate() {
        for (l, v) in b.volumes.iter().enumerate() {
            geometry.push((format!("initial volume of I{} in L{}", i + 1, l + 1), *v));
        }
    }
    if let Some((what, _)) = geometry.iter().find(|(_, x)| !commensurate(*x, quantum)) {
        return Err(SearchError::NotCommensurate {
            quantum,
            what: what.clone(),
        });
    }

    let ops = inst.time_grid.operational_slots();
    let mut s = Search {
        inst,
        quantum,
        limits,
        plan: ResolvedPlan {
            slots: vec![ResolvedSlot::default(); ops],
            assignments: vec![None; inst.batch_count()],
        },
        best: None,
        candidates: 0,
        feasible: 0,
    };
    s.slot(1)?;
    Ok(BruteForceResult {
        best: s.best,
        candidates: s.candidates,
        feasible_plans: s.feasible,
    })
}

struct Search<'a> {
    inst: &'a PipelineInstance,
    quantum: f64,
    limits: SearchLimits,
    plan: ResolvedPlan,
    best: Option<(ResolvedPlan, f64)>,
    candidates: u64,
    feasible: u64,
}

/// Decisions of one line within a slot.
#[derive(Clone, Default)]
struct LineChoice {
    injection: Option<(usize, usize, f64)>,
    deliveries: Vec<(usize, usize, f64)>,
    outgoing: Option<(usize, f64)>,
}

impl Search<'_> {
    fn slot(&mut self, t: usize) -> Result<(), SearchError> {
        let ops = self.plan.slots.len();
        if t > ops {
            self.leaf();
            return Ok(());
        }
        let mut choices = Vec::new();
        self.lines(0, None, &mut Vec::new(), &mut choices);
        for slot in choices {
            self.candidates += 1;
            if self.candidates > self.limits.max_candidates {
                return Err(SearchError::SearchSpaceTooLarge {
                    cap: self.limits.max_candidates,
                });
            }
            self.plan.slots[t - 1] = slot;
            if check_upto(self.inst, &self.plan, t, false).is_empty() && !self.dominated() {
                self.slot(t + 1)?;
            }
        }
        self.plan.slots[t - 1] = ResolvedSlot::default();
        Ok(())
    }

    /// A partial plan whose committed costs already exceed the incumbent.
    fn dominated(&self) -> bool {
        let Some((_, best)) = &self.best else { return false };
        let c = plan_cost(self.inst, &self.plan);
        c.pumping + c.interface > best + 1e-9
    }

    fn leaf(&mut self) {
        if !check_upto(self.inst, &self.plan, self.plan.slots.len(), true).is_empty() {
            return;
        }
        self.feasible += 1;
        let cost = plan_cost(self.inst, &self.plan).total;
        if self.best.as_ref().is_none_or(|(_, b)| cost < b - 1e-9) {
            self.best = Some((self.plan.clone(), cost));
        }
    }

    /// Product a batch would carry if injected now.
    fn products_for(&self, batch: usize) -> Vec<usize> {
        if let Some(p) = self.inst.fixed_product(batch) {
            return vec![p];
        }
        for s in &self.plan.slots {
            if let Some(&(_, _, p, _)) = s.injections.iter().find(|e| e.1 == batch) {
                return vec![p];
            }
        }
        (0..self.inst.products.len()).collect()
    }

    /// Enumerate conserving decisions for lines `l..`, given the volume
    /// entering line `l` from upstream.
    fn lines(&self, l: usize, incoming: Option<(usize, f64)>, acc: &mut Vec<LineChoice>, out: &mut Vec<ResolvedSlot>) {
        let inst = self.inst;
        if l == inst.lines.len() {
            let mut slot = ResolvedSlot::default();
            for (k, c) in acc.iter().enumerate() {
                if let Some((i, p, v)) = c.injection {
                    slot.injections.push((k, i, p, v));
                }
                slot.deliveries.extend(c.deliveries.iter().copied());
                if let Some((i, v)) = c.outgoing {
                    slot.transfers.push((k + 1, i, v));
                }
            }
            out.push(slot);
            return;
        }
        let q = self.quantum;
        let dt = inst.time_grid.slot_hours;
        let mut injections: Vec<Option<(usize, usize, f64)>> = vec![None];
        if incoming.is_none() {
            if let Some(n) = inst.input_node_of_line(l) {
                let node = &inst.input_nodes[n];
                let lo = node.inject_min.max(dt * node.rate_min);
                let hi = node.inject_max.min(dt * node.rate_max);
                for &i in &node.eligible {
                    for p in self.products_for(i) {
                        for v in grid(lo, hi, q) {
                            injections.push(Some((i, p, v)));
                        }
                    }
                }
            }
        }
        let mut outgoing: Vec<Option<(usize, f64)>> = vec![None];
        if l + 1 < inst.lines.len() {
            for i in 0..inst.batch_count() {
                for v in grid(inst.transfer_min, inst.transfer_max, q) {
                    outgoing.push(Some((i, v)));
                }
            }
        }
        let depots: Vec<usize> = inst.depots_of_line(l).collect();
        for inj in &injections {
            let inflow = inj.map_or(0.0, |x| x.2) + incoming.map_or(0.0, |x| x.1);
            for out_tr in &outgoing {
                let rest = inflow - out_tr.map_or(0.0, |x| x.1);
                if rest < -1e-9 {
                    continue;
                }
                let mut dels = Vec::new();
                self.depots(&depots, 0, rest, &mut Vec::new(), &mut dels);
                for d in dels {
                    acc.push(LineChoice {
                        injection: *inj,
                        deliveries: d,
                        outgoing: *out_tr,
                    });
                    self.lines(l + 1, *out_tr, acc, out);
                    acc.pop();
                }
            }
        }
    }

    /// Depot decisions of one line summing to exactly `rest`.
    fn depots(
        &self,
        depots: &[usize],
        k: usize,
        rest: f64,
        acc: &mut Vec<(usize, usize, f64)>,
        out: &mut Vec<Vec<(usize, usize, f64)>>,
    ) {
        if k == depots.len() {
            if rest.abs() < 1e-9 {
                out.push(acc.clone());
            }
            return;
        }
        self.depots(depots, k + 1, rest, acc, out);
        let d = depots[k];
        let dep = &self.inst.output_nodes[d];
        for &i in &dep.eligible {
            for v in grid(dep.deliver_min, dep.deliver_max.min(rest + 1e-9), self.quantum) {
                acc.push((d, i, v));
                self.depots(depots, k + 1, rest - v, acc, out);
                acc.pop();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points() {
        assert_eq!(grid(2.0, 20.0, 5.0), vec![5.0, 10.0, 15.0, 20.0]);
        assert_eq!(grid(0.0, 12.0, 5.0), vec![5.0, 10.0]);
        assert_eq!(grid(6.8, 10.2, 5.0), vec![10.0]);
        assert!(grid(11.0, 14.0, 5.0).is_empty());
    }
}
