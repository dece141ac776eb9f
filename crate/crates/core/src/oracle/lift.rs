use crate::instance::PipelineInstance;
use crate::milp::{MilpModel, VarRef};

use super::check::{batch_products, simulate};
use super::ResolvedPlan;

/// Express `plan` as a full assignment of `model`'s variables, so the MILP
/// rows can be evaluated on a schedule that was never solved for.
///
/// Returns `None` when the plan uses a variable the model does not have, for
/// example an injection into a batch outside the node's eligible set.
pub fn lift_plan(inst: &PipelineInstance, model: &MilpModel, plan: &ResolvedPlan) -> Option<Vec<f64>> {
    let mut x = vec![0.0; model.variables.len()];
    let set = |key: VarRef, v: f64, x: &mut Vec<f64>| -> Option<()> {
        let id = model.var(&key)?;
        x[id.0] += v;
        Some(())
    };
    let products = batch_products(inst, plan);
    let nb = inst.batch_count();
    for (i, p) in products.iter().enumerate() {
        if let Some(p) = *p {
            set(VarRef::Assign { batch: i, product: p }, 1.0, &mut x)?;
        }
    }
    for (k, s) in plan.slots.iter().enumerate() {
        let slot = k + 1;
        for &(line, batch, product, v) in &s.injections {
            set(VarRef::Injected { batch, line, slot }, v, &mut x)?;
            set(VarRef::InjectedProduct { batch, product, line, slot }, v, &mut x)?;
            let w = model.var(&VarRef::Inject { batch, line, slot })?;
            x[w.0] = 1.0;
        }
        for &(depot, batch, v) in &s.deliveries {
            set(VarRef::Delivered { batch, depot, slot }, v, &mut x)?;
            if let Some(product) = products[batch] {
                set(VarRef::DeliveredProduct { batch, product, depot, slot }, v, &mut x)?;
            }
            let id = model.var(&VarRef::Receive { batch, depot, slot })?;
            x[id.0] = 1.0;
        }
        for &(line, batch, v) in &s.transfers {
            set(VarRef::Transferred { batch, line, slot }, v, &mut x)?;
            let id = model.var(&VarRef::Move { batch, line, slot })?;
            x[id.0] = 1.0;
        }
    }
    let traj = simulate(inst, plan);
    let last = traj.states() - 1;
    for state in inst.time_grid.states() {
        let s = state.min(last);
        for l in 0..inst.lines.len() {
            for i in 0..nb {
                set(VarRef::Volume { batch: i, line: l, state }, traj.volumes[s][l][i], &mut x)?;
                set(VarRef::Coord { batch: i, line: l, state }, traj.coordinate(s, l, i), &mut x)?;
            }
        }
    }
    let cost = super::plan_cost(inst, plan);
    for &(p, d, _, short) in &cost.demand {
        set(VarRef::Backorder { product: p, depot: d }, short, &mut x)?;
    }
    for &(_, succ, _, _, c) in &cost.interfaces {
        set(VarRef::InterfaceCost { batch: succ }, c, &mut x)?;
    }
    Some(x)
}
