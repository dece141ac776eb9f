//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Solver time limits default to the budgets of each criterion. Set
//! `PIPESCHED_ACCEPT_TIME_LIMIT` (seconds) to cap every solve for a quicker,
//! possibly failing, run.

use std::process::ExitCode;
use std::time::Instant;

use pipesched::milp::{self, MilpModel};
use pipesched::oracle::{brute_force_optimize, check, resolve, simulate, surplus_pumped, OperatingPlan, SearchLimits};
use pipesched::schedule::{cost_breakdown, extract_schedule};
use pipesched::solver::{export_mps, parse_solution, solve, Solution, SolveStatus, SolverConfig};
use pipesched::{builtin_instance, load_instance, serialize_instance, BuiltinName, PipelineInstance};

struct Outcome {
    pass: bool,
    detail: String,
}

fn pass(detail: impl Into<String>) -> Outcome {
    Outcome {
        pass: true,
        detail: detail.into(),
    }
}

fn fail(detail: impl Into<String>) -> Outcome {
    Outcome {
        pass: false,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn time_limit(budget: f64) -> f64 {
    std::env::var("PIPESCHED_ACCEPT_TIME_LIMIT")
        .ok()
        .and_then(|s| s.parse::<f64>().ok())
        .map_or(budget, |cap| cap.min(budget))
}

fn config(budget: f64) -> SolverConfig {
    SolverConfig {
        time_limit: time_limit(budget),
        gap: 0.0,
        ..SolverConfig::from_env()
    }
}

fn fixture(name: &str) -> Vec<u8> {
    std::fs::read(format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

/// Solve and cross-check the incumbent against the oracle. Returns the
/// solution with its event-recomputed total and backorder volume.
fn solve_checked(inst: &PipelineInstance, model: &MilpModel, cfg: &SolverConfig) -> Result<(Solution, f64, f64), String> {
    let sol = solve(model, cfg).map_err(|e| format!("solver failed: {e}"))?;
    if !sol.status.has_incumbent() {
        return Err(format!("status {}", sol.status));
    }
    let schedule = extract_schedule(inst, model, &sol).map_err(|e| e.to_string())?;
    let report = check(inst, &schedule.to_resolved_plan(inst));
    if !report.is_empty() {
        return Err(format!("schedule rejected by the oracle: {:?}", report.rules()));
    }
    let costs = cost_breakdown(inst, &schedule);
    let objective = sol.objective.unwrap_or(f64::NAN);
    if rel(costs.total, objective) > 1e-4 {
        return Err(format!("recomputed cost {} differs from objective {objective}", costs.total));
    }
    Ok((sol, costs.total, costs.backorder_volume()))
}

fn criterion_1() -> Outcome {
    let inst = builtin_instance(BuiltinName::Example1);
    let model = milp::build(&inst).unwrap();
    let start = Instant::now();
    match solve_checked(&inst, &model, &config(7200.0)) {
        Err(e) => fail(format!("example1: {e} after {:.0} s", start.elapsed().as_secs_f64())),
        Ok((sol, total, _)) => {
            let secs = start.elapsed().as_secs_f64();
            if sol.status == SolveStatus::Optimal {
                let msg = format!("example1 objective {total} (target 805300) in {secs:.0} s");
                if rel(total, 805300.0) <= 1e-4 {
                    pass(msg)
                } else {
                    fail(msg)
                }
            } else {
                let gap = sol.gap.unwrap_or(f64::INFINITY);
                let msg = format!("example1 budget expired: incumbent {total}, gap {gap:.4} after {secs:.0} s");
                if total <= 812000.0 && gap <= 0.01 {
                    pass(format!("{msg} (provisional)"))
                } else {
                    fail(msg)
                }
            }
        }
    }
}

fn criterion_2() -> Outcome {
    let inst = builtin_instance(BuiltinName::Example2);
    let model = milp::build(&inst).unwrap();
    let start = Instant::now();
    match solve_checked(&inst, &model, &config(600.0)) {
        Err(e) => fail(format!("example2: {e}")),
        Ok((sol, total, _)) => {
            let secs = start.elapsed().as_secs_f64();
            let msg = format!("example2 objective {total} (target 420200), status {}, {secs:.0} s", sol.status);
            if sol.status == SolveStatus::Optimal && rel(total, 420200.0) <= 1e-4 {
                pass(msg)
            } else {
                fail(msg)
            }
        }
    }
}

const SWEEP_ROWS: [(f64, f64, f64); 10] = [
    (1000.0, 126.4, 172840.0),
    (2000.0, 83.2, 287620.0),
    (3000.0, 60.0, 364000.0),
    (4000.0, 20.0, 402200.0),
    (4200.0, 20.0, 406200.0),
    (4400.0, 20.0, 410200.0),
    (4600.0, 20.0, 414200.0),
    (5000.0, 0.0, 420200.0),
    (5200.0, 0.0, 420200.0),
    (5400.0, 0.0, 420200.0),
];

fn criterion_3() -> Outcome {
    let base = builtin_instance(BuiltinName::Example2);
    let mut model = milp::build(&base).unwrap();
    let mut misses = Vec::new();
    let mut rows = Vec::new();
    for &(coef, backorder, objective) in &SWEEP_ROWS {
        milp::set_backorder_cost(&mut model, coef);
        let mut inst = base.clone();
        inst.set_backorder_cost(coef);
        match solve_checked(&inst, &model, &config(600.0)) {
            Err(e) => misses.push(format!("{coef}: {e}")),
            Ok((sol, total, volume)) => {
                rows.push(format!("{coef}->({volume:.1},{total})"));
                let ok = sol.status == SolveStatus::Optimal
                    && rel(total, objective) <= 1e-4
                    && (volume - backorder).abs() <= 1e-3;
                if !ok {
                    misses.push(format!("{coef}: got ({volume}, {total}) want ({backorder}, {objective})"));
                }
            }
        }
    }
    if misses.is_empty() {
        pass(format!("all 10 rows match: {}", rows.join(" ")))
    } else {
        fail(format!("{} of 10 rows differ: {}", misses.len(), misses.join("; ")))
    }
}

fn criterion_4() -> Outcome {
    let inst = builtin_instance(BuiltinName::Motivating);
    let mut notes = Vec::new();

    // Solver side: the optimum meets every demand in 2 slots of 10 h.
    let model = milp::build(&inst).unwrap();
    let solved = match solve_checked(&inst, &model, &config(600.0)) {
        Err(e) => return fail(format!("motivating solve: {e}")),
        Ok((sol, total, backorder)) => {
            let schedule = extract_schedule(&inst, &model, &sol).unwrap();
            let simultaneous = (1..=2).any(|t| schedule.injections.iter().filter(|e| e.slot == t).count() == 2);
            notes.push(format!("MILP total {total}, backorder {backorder}"));
            backorder == 0.0 && simultaneous && inst.time_grid.operational_slots() == 2
        }
    };

    let fig2 = OperatingPlan::from_json(&fixture("motivating_simultaneous.json")).unwrap();
    let plan2 = resolve(&inst, &fig2).unwrap();
    let fig2_ok = check(&inst, &plan2).is_empty();
    notes.push(format!("simultaneous plan feasible: {fig2_ok}"));

    let slow = inst.with_operational_slots(4);
    let fig1 = OperatingPlan::from_json(&fixture("motivating_constant_rate.json")).unwrap();
    let plan1 = resolve(&slow, &fig1).unwrap();
    let fig1_ok = check(&slow, &plan1).is_empty();
    let surplus = surplus_pumped(&slow, &plan1);
    let only_p2 = plan1.slots.iter().flat_map(|s| &s.injections).all(|e| e.2 == 1);
    notes.push(format!("constant-rate plan feasible: {fig1_ok}, surplus {surplus} units of P2"));

    let msg = notes.join("; ");
    if solved && fig2_ok && fig1_ok && (surplus - 8.0).abs() < 1e-9 && only_p2 {
        pass(msg)
    } else {
        fail(msg)
    }
}

fn criterion_5() -> Outcome {
    let inst = builtin_instance(BuiltinName::Motivating);
    let oracle = match brute_force_optimize(&inst, 5.0, SearchLimits::default()) {
        Ok(r) => r,
        Err(e) => return fail(format!("brute force: {e}")),
    };
    let Some((_, best)) = oracle.best else {
        return fail("brute force found no feasible grid plan");
    };
    let mut model = milp::build(&inst).unwrap();
    milp::add_grid_restriction(&mut model, &inst, 5.0);
    let sol = match solve(&model, &config(600.0)) {
        Ok(s) if s.status == SolveStatus::Optimal => s,
        Ok(s) => return fail(format!("grid MILP status {}", s.status)),
        Err(e) => return fail(format!("grid MILP: {e}")),
    };
    let milp_best = sol.objective.unwrap();
    let msg = format!(
        "oracle {best} over {} candidates, grid MILP {milp_best}",
        oracle.candidates
    );
    if (best - milp_best).abs() <= 1e-4 {
        pass(msg)
    } else {
        fail(msg)
    }
}

fn criterion_6() -> Outcome {
    let mut failures = Vec::new();

    for name in BuiltinName::ALL {
        let inst = builtin_instance(name);
        let text = serialize_instance(&inst);
        if load_instance(text.as_bytes()).ok().as_ref() != Some(&inst) {
            failures.push(format!("{name} does not round-trip"));
        }
        let model = milp::build(&inst).unwrap();
        if export_mps(&model) != export_mps(&milp::build(&inst).unwrap()) {
            failures.push(format!("{name} MPS export differs between runs"));
        }
    }

    let motivating = builtin_instance(BuiltinName::Motivating);
    let mut zero = motivating.clone();
    for d in zero.output_nodes.iter_mut() {
        d.demand.iter_mut().for_each(|x| *x = 0.0);
    }
    zero.options.force_active_injection = false;
    zero.options.optional_new_batches = true;
    let fixtures = [
        (&motivating, "motivating.sol", None),
        (&motivating, "motivating_grid5.sol", Some(5.0)),
        (&zero, "motivating_zero_demand.sol", None),
    ];
    for (inst, name, grid) in fixtures {
        let mut model = milp::build(inst).unwrap();
        if let Some(q) = grid {
            milp::add_grid_restriction(&mut model, inst, q);
        }
        let text = String::from_utf8(fixture(name)).unwrap();
        let sol = parse_solution(&model, &text).unwrap();
        let schedule = extract_schedule(inst, &model, &sol).unwrap();
        let total = cost_breakdown(inst, &schedule).total;
        if (total - sol.objective.unwrap()).abs() > 1e-4 {
            failures.push(format!("{name}: recomputed {total} vs {}", sol.objective.unwrap()));
        }
        let plan = schedule.to_resolved_plan(inst);
        if !check(inst, &plan).is_empty() {
            failures.push(format!("{name}: schedule rejected"));
        }
        accepted_plan_properties(inst, &plan, name, &mut failures);
    }
    for (inst, name) in [
        (motivating.clone(), "motivating_simultaneous.json"),
        (motivating.with_operational_slots(4), "motivating_constant_rate.json"),
    ] {
        let plan = resolve(&inst, &OperatingPlan::from_json(&fixture(name)).unwrap()).unwrap();
        accepted_plan_properties(&inst, &plan, name, &mut failures);
    }

    if failures.is_empty() {
        pass("round-trip, fullness, coordinates, cost recomputation, forbidden pairs and MPS determinism hold (see also the properties suite)")
    } else {
        fail(failures.join("; "))
    }
}

fn accepted_plan_properties(
    inst: &PipelineInstance,
    plan: &pipesched::oracle::ResolvedPlan,
    name: &str,
    failures: &mut Vec<String>,
) {
    let traj = simulate(inst, plan);
    for t in 0..traj.states() {
        for (l, line) in inst.lines.iter().enumerate() {
            if (traj.line_total(t, l) - line.volume).abs() > 1e-6 {
                failures.push(format!("{name}: line L{} not full at state {t}", l + 1));
            }
            for i in 0..inst.batch_count() {
                let upstream: f64 = traj.volumes[t][l][i..].iter().sum();
                if (traj.coordinate(t, l, i) - upstream).abs() > 1e-6 {
                    failures.push(format!("{name}: coordinate mismatch at I{} L{} state {t}", i + 1, l + 1));
                }
            }
        }
    }
    let mut products: Vec<Option<usize>> = (0..inst.batch_count()).map(|i| inst.fixed_product(i)).collect();
    for s in &plan.slots {
        for &(_, i, p, _) in &s.injections {
            products[i].get_or_insert(p);
        }
    }
    for (i, p) in plan.assignments.iter().enumerate() {
        if let Some(p) = p {
            products[i].get_or_insert(*p);
        }
    }
    let assigned: Vec<usize> = products.into_iter().flatten().collect();
    if assigned.windows(2).any(|w| inst.forbidden[w[0]][w[1]]) {
        failures.push(format!("{name}: forbidden adjacency"));
    }
}

type Criterion = (usize, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [Criterion; 6] = [
        (1, "Example 1 objective", criterion_1),
        (2, "Example 2 objective", criterion_2),
        (3, "Backorder sweep", criterion_3),
        (4, "Motivating example", criterion_4),
        (5, "Oracle equivalence", criterion_5),
        (6, "Property suites", criterion_6),
    ];
    let mut failed = 0;
    for (n, title, run) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {n} [{verdict}] {title}: {} ({:.1} s)",
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
