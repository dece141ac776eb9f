use pipesched::milp;
use pipesched::oracle::{check, lift_plan, plan_cost, resolve, simulate, surplus_pumped, OperatingPlan, ResolvedPlan};
use pipesched::{builtin_instance, BuiltinName, PipelineInstance};

fn fixture(name: &str) -> OperatingPlan {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    OperatingPlan::from_json(&std::fs::read(path).unwrap()).unwrap()
}

fn motivating(slots: usize) -> PipelineInstance {
    builtin_instance(BuiltinName::Motivating).with_operational_slots(slots)
}

#[test]
fn simultaneous_plan_is_feasible() {
    let inst = motivating(2);
    let plan = resolve(&inst, &fixture("motivating_simultaneous.json")).unwrap();
    let report = check(&inst, &plan);
    assert!(report.is_empty(), "{report}");
    let cost = plan_cost(&inst, &plan);
    assert_eq!(cost.pumping, 54.0);
    assert_eq!(cost.interface, 4.0);
    assert_eq!(cost.total_shortfall(), 0.0);
    assert_eq!(surplus_pumped(&inst, &plan), 0.0);
}

#[test]
fn constant_rate_plan_pumps_eight_extra() {
    let inst = motivating(4);
    let plan = resolve(&inst, &fixture("motivating_constant_rate.json")).unwrap();
    let report = check(&inst, &plan);
    assert!(report.is_empty(), "{report}");
    assert_eq!(surplus_pumped(&inst, &plan), 8.0);
    // The same plan does not fit in two slots.
    let short = motivating(2);
    assert!(resolve(&short, &fixture("motivating_constant_rate.json")).is_err());
}

#[test]
fn idle_plan_keeps_linefill() {
    let inst = motivating(2);
    let plan = ResolvedPlan {
        slots: vec![Default::default(); 2],
        assignments: vec![None; inst.batch_count()],
    };
    let traj = simulate(&inst, &plan);
    assert_eq!(traj.states(), 3);
    for t in 0..3 {
        assert_eq!(traj.volumes[t], traj.volumes[0]);
    }
    let report = check(&inst, &plan);
    assert!(report.has_rule("1"), "{report}");
}

#[test]
fn over_rate_injection_is_flagged() {
    let inst = motivating(2);
    let mut plan = resolve(&inst, &fixture("motivating_simultaneous.json")).unwrap();
    // 16 units in 10 h exceeds the 1.5 units/h ceiling at L1.
    plan.slots[0].injections[0].3 = 16.0;
    plan.slots[0].deliveries[0].2 = 16.0;
    let report = check(&inst, &plan);
    assert!(report.has_rule("13"), "{report}");
}

#[test]
fn unbalanced_line_is_flagged() {
    let inst = motivating(2);
    let mut plan = resolve(&inst, &fixture("motivating_simultaneous.json")).unwrap();
    plan.slots[1].deliveries[0].2 = 9.0;
    let report = check(&inst, &plan);
    assert!(!report.is_empty());
    assert!(report.has_rule("31"), "{report}");
}

#[test]
fn lifted_plans_satisfy_the_model() {
    for (slots, name) in [(2, "motivating_simultaneous.json"), (4, "motivating_constant_rate.json")] {
        let inst = motivating(slots);
        let plan = resolve(&inst, &fixture(name)).unwrap();
        let model = milp::build(&inst).unwrap();
        let x = lift_plan(&inst, &model, &plan).expect("plan lifts");
        let bad = model.violations(&x, 1e-6);
        assert!(bad.is_empty(), "{name}: {:?}", bad.iter().map(|v| &v.row).collect::<Vec<_>>());
        let cost = plan_cost(&inst, &plan);
        assert!((model.objective_value(&x) - cost.total).abs() < 1e-6);
    }
}

#[test]
fn lifted_infeasible_plan_breaks_the_model() {
    let inst = motivating(2);
    let mut plan = resolve(&inst, &fixture("motivating_simultaneous.json")).unwrap();
    plan.slots[1].deliveries[0].2 = 9.0;
    let model = milp::build(&inst).unwrap();
    if let Some(x) = lift_plan(&inst, &model, &plan) {
        assert!(!model.violations(&x, 1e-6).is_empty());
    }
}

#[test]
fn injection_behind_a_newer_batch_is_flagged() {
    let inst = motivating(2);
    let mut plan = resolve(&inst, &fixture("motivating_simultaneous.json")).unwrap();
    // I3 already occupies the origin of L1 after slot 1.
    plan.slots[1].injections[0].1 = 1;
    let report = check(&inst, &plan);
    assert!(report.has_rule("10"), "{report}");
}

#[test]
fn transfer_while_receiving_line_pumps_is_flagged() {
    let inst = motivating(2);
    let mut plan = resolve(&inst, &fixture("motivating_simultaneous.json")).unwrap();
    plan.slots[0].deliveries[0].2 = 6.0;
    plan.slots[0].transfers.push((1, 1, 5.0));
    plan.slots[0].deliveries[1].2 = 10.0;
    let report = check(&inst, &plan);
    assert!(report.has_rule("27"), "{report}");
}
