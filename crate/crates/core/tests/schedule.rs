use pipesched::milp::{self, MilpModel, VarRef};
use pipesched::oracle::{check, resolve, OperatingPlan};
use pipesched::schedule::{cost_breakdown, extract_schedule, render_report, ReportFormat, Schedule};
use pipesched::solver::{parse_solution, Solution, SolveStatus};
use pipesched::{builtin_instance, BuiltinName, PipelineInstance};
use serde_json::Value;

fn fixture(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn zero_demand() -> PipelineInstance {
    let mut inst = builtin_instance(BuiltinName::Motivating);
    for d in inst.output_nodes.iter_mut() {
        d.demand.iter_mut().for_each(|x| *x = 0.0);
    }
    inst.options.force_active_injection = false;
    inst.options.optional_new_batches = true;
    inst
}

fn load(inst: &PipelineInstance, sol: &str, grid: Option<f64>) -> (MilpModel, Solution) {
    let mut model = milp::build(inst).unwrap();
    if let Some(q) = grid {
        milp::add_grid_restriction(&mut model, inst, q);
    }
    let sol = parse_solution(&model, &fixture(sol)).unwrap();
    (model, sol)
}

#[test]
fn stored_solutions_recompute_to_their_objective() {
    let cases = [
        (builtin_instance(BuiltinName::Motivating), "motivating.sol", None),
        (builtin_instance(BuiltinName::Motivating), "motivating_grid5.sol", Some(5.0)),
        (zero_demand(), "motivating_zero_demand.sol", None),
    ];
    for (inst, name, grid) in cases {
        let (model, sol) = load(&inst, name, grid);
        assert!(model.violations(&sol.values, 1e-6).is_empty(), "{name}");
        let reported = sol.objective.unwrap();
        assert!((model.objective_value(&sol.values) - reported).abs() <= 1e-4, "{name}");
        let schedule = extract_schedule(&inst, &model, &sol).unwrap();
        let costs = cost_breakdown(&inst, &schedule);
        assert!((costs.total - reported).abs() <= 1e-4, "{name}: {} vs {reported}", costs.total);
        assert!(
            (costs.pumping + costs.interface + costs.backorder - costs.total).abs() < 1e-9,
            "{name}"
        );
        let report = check(&inst, &schedule.to_resolved_plan(&inst));
        assert!(report.is_empty(), "{name}: {report}");
        assert!(schedule.snapshot_residual(&inst) < 1e-6, "{name}");
    }
}

#[test]
fn motivating_optimum_meets_demand_in_two_slots() {
    let inst = builtin_instance(BuiltinName::Motivating);
    let (model, sol) = load(&inst, "motivating.sol", None);
    let schedule = extract_schedule(&inst, &model, &sol).unwrap();
    let costs = cost_breakdown(&inst, &schedule);
    assert_eq!(costs.backorder, 0.0);
    assert_eq!(costs.backorder_volume(), 0.0);
    assert_eq!(schedule.operational_slots, 2);
    for e in &schedule.injections {
        let node = &inst.input_nodes[inst.input_node_of_line(e.line).unwrap()];
        assert!(e.rate >= node.rate_min - 1e-9 && e.rate <= node.rate_max + 1e-9);
    }
    // Both sources pump in at least one common slot.
    assert!((1..=2).any(|t| {
        schedule.injections.iter().filter(|e| e.slot == t).count() == 2
    }));
}

#[test]
fn injected_totals_match_raw_variables() {
    let inst = builtin_instance(BuiltinName::Motivating);
    let (model, sol) = load(&inst, "motivating.sol", None);
    let schedule = extract_schedule(&inst, &model, &sol).unwrap();
    for l in 0..inst.lines.len() {
        for p in 0..inst.products.len() {
            let mut raw = 0.0;
            for (v, x) in model.variables.iter().zip(&sol.values) {
                if let VarRef::InjectedProduct { product, line, .. } = v.key {
                    if product == p && line == l {
                        raw += x;
                    }
                }
            }
            let events: f64 = schedule
                .injections
                .iter()
                .filter(|e| e.line == l && e.product == p)
                .map(|e| e.volume)
                .sum();
            assert!((raw - events).abs() < 1e-6, "L{} product {p}", l + 1);
        }
    }
}

#[test]
fn zero_demand_solution_has_no_events() {
    let inst = zero_demand();
    let (model, sol) = load(&inst, "motivating_zero_demand.sol", None);
    let schedule = extract_schedule(&inst, &model, &sol).unwrap();
    assert!(schedule.injections.is_empty());
    assert!(schedule.deliveries.is_empty());
    assert!(schedule.transfers.is_empty());
    let costs = cost_breakdown(&inst, &schedule);
    assert_eq!(costs.pumping, 0.0);
    assert_eq!(costs.backorder, 0.0);
    // Only the interface already present in the linefill remains.
    assert_eq!(costs.interface, 4.0);
}

#[test]
fn unusable_solutions_are_rejected() {
    let inst = builtin_instance(BuiltinName::Motivating);
    let (model, mut sol) = load(&inst, "motivating.sol", None);
    let y = model.var(&VarRef::Assign { batch: 2, product: 1 }).unwrap();
    sol.values[y.0] = 0.5;
    assert!(extract_schedule(&inst, &model, &sol).is_err());
    sol.status = SolveStatus::Infeasible;
    assert!(extract_schedule(&inst, &model, &sol).is_err());
}

#[test]
fn extracted_plan_round_trips_through_json() {
    let inst = builtin_instance(BuiltinName::Motivating);
    let (model, sol) = load(&inst, "motivating.sol", None);
    let schedule = extract_schedule(&inst, &model, &sol).unwrap();
    let plan = schedule.to_plan(&inst);
    let back = OperatingPlan::from_json(plan.to_json().as_bytes()).unwrap();
    assert_eq!(back, plan);
    assert_eq!(resolve(&inst, &back).unwrap(), schedule.to_resolved_plan(&inst));
}

fn total_from_text(text: &str) -> f64 {
    text.lines()
        .find_map(|l| l.trim().strip_prefix("total"))
        .unwrap()
        .trim()
        .parse()
        .unwrap()
}

#[test]
fn renderings_agree_on_totals() {
    let inst = builtin_instance(BuiltinName::Motivating);
    let (model, sol) = load(&inst, "motivating.sol", None);
    let schedule = extract_schedule(&inst, &model, &sol).unwrap();
    let text = String::from_utf8(render_report(&inst, &schedule, ReportFormat::Text)).unwrap();
    let json: Value = serde_json::from_slice(&render_report(&inst, &schedule, ReportFormat::Json)).unwrap();
    assert_eq!(json["costs"]["total"].as_f64().unwrap(), total_from_text(&text));
    assert_eq!(total_from_text(&text), 58.0);
}

#[test]
fn empty_schedule_reports_zero() {
    let inst = zero_demand();
    let plan = pipesched::oracle::ResolvedPlan {
        slots: vec![Default::default(); 2],
        assignments: vec![None; inst.batch_count()],
    };
    let schedule = Schedule::from_plan(&inst, &plan);
    let text = String::from_utf8(render_report(&inst, &schedule, ReportFormat::Text)).unwrap();
    assert!(text.contains("events: 0"));
    let json: Value = serde_json::from_slice(&render_report(&inst, &schedule, ReportFormat::Json)).unwrap();
    assert_eq!(json["costs"]["pumping"], 0.0);
    assert_eq!(json["costs"]["backorder"], 0.0);
}

#[test]
fn gantt_of_simultaneous_plan_has_two_slots() {
    let inst = builtin_instance(BuiltinName::Motivating);
    let plan = OperatingPlan::from_json(fixture("motivating_simultaneous.json").as_bytes()).unwrap();
    let schedule = Schedule::from_plan(&inst, &resolve(&inst, &plan).unwrap());
    let gantt: Value = serde_json::from_slice(&render_report(&inst, &schedule, ReportFormat::GanttJson)).unwrap();
    let slots = gantt["slots"].as_array().unwrap();
    assert_eq!(slots.len(), 2);
    for slot in slots {
        for line in ["L1", "L2"] {
            let occupied: f64 = slot["segments"]
                .as_array()
                .unwrap()
                .iter()
                .filter(|s| s["line"] == line)
                .map(|s| s["hi"].as_f64().unwrap() - s["lo"].as_f64().unwrap())
                .sum();
            assert!((occupied - 40.0).abs() < 1e-9);
        }
    }
    assert_eq!(slots[1]["end_hours"], 20.0);
}
