use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use pipesched::error::SolverError;
use pipesched::milp::{self, MilpModel};
use pipesched::oracle::{check, resolve, OperatingPlan};
use pipesched::schedule::{cost_breakdown, extract_schedule, render_report, ReportFormat};
use pipesched::solver::{self, Solution, SolveStatus, SolverConfig, WorkdirPolicy, SOLVER_CMD_ENV};
use pipesched::{builtin_instance, load_instance, serialize_instance, BuiltinName, PipelineInstance};

const EXIT_VIOLATIONS: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "pipesched", version, about = "Discrete-time MILP scheduling of multiproduct pipelines")]
struct Cli {
    /// Solver command template; placeholders {mps} {sol} {timelimit} {gap}
    /// {threads} {script}. Prefix with `cbc:` for CBC solution files.
    #[arg(long, global = true, env = SOLVER_CMD_ENV)]
    solver_cmd: Option<String>,
    /// Relative optimality gap at which the solver may stop.
    #[arg(long, global = true, default_value_t = 0.0)]
    gap: f64,
    /// Solver time limit in seconds.
    #[arg(long, global = true, default_value_t = 7200.0)]
    time_limit: f64,
    /// Solver threads, 0 for the solver default.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Keep solver working files in this directory.
    #[arg(long, global = true)]
    keep_workdir: Option<PathBuf>,
    /// Directory receiving artifacts and the run manifest.
    #[arg(long, global = true, default_value = "pipesched-out")]
    out_dir: PathBuf,
    /// Rendering printed to standard output: text, json or gantt_json.
    #[arg(long, global = true, default_value = "text")]
    format: ReportFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Source {
    /// Builtin instance: motivating, example1 or example2.
    #[arg(long, conflicts_with = "instance", required_unless_present = "instance")]
    builtin: Option<BuiltinName>,
    /// Instance JSON file.
    #[arg(long)]
    instance: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build, solve and report a schedule.
    Solve {
        #[command(flatten)]
        source: Source,
    },
    /// Solve once per backorder coefficient.
    Sweep {
        #[command(flatten)]
        source: Source,
        /// Comma-separated backorder coefficients.
        #[arg(long, value_delimiter = ',', required = true)]
        coefficients: Vec<f64>,
    },
    /// Check an operating plan against every operational rule.
    Validate {
        #[command(flatten)]
        source: Source,
        /// Operating plan JSON file.
        #[arg(long)]
        plan: PathBuf,
    },
    /// Write the model in MPS format.
    Export {
        #[command(flatten)]
        source: Source,
    },
    /// Write the builtin instances as JSON files.
    Examples,
    /// Print model size statistics.
    Stats {
        #[command(flatten)]
        source: Source,
    },
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Self {
            code,
            error: error.into(),
        }
    }
}

type Outcome = Result<u8, Failure>;

fn io<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::new(EXIT_IO, e)
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    instance: Option<String>,
    instance_sha256: Option<String>,
    solver: Option<SolverConfig>,
    started: String,
    finished: String,
    outputs: Vec<PathBuf>,
    result: Value,
    exit_code: u8,
}

struct Run {
    out_dir: PathBuf,
    command: &'static str,
    instance: Option<(String, String)>,
    solver: Option<SolverConfig>,
    started: String,
    outputs: Vec<PathBuf>,
    result: Value,
}

impl Run {
    fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf, Failure> {
        let path = self.out_dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display())).map_err(io)?;
        self.outputs.push(path.clone());
        Ok(path)
    }

    fn finish(self, exit_code: u8) -> Result<(), Failure> {
        let (instance, hash) = self.instance.map_or((None, None), |(n, h)| (Some(n), Some(h)));
        let manifest = RunManifest {
            command: self.command.into(),
            instance,
            instance_sha256: hash,
            solver: self.solver,
            started: self.started,
            finished: now(),
            outputs: self.outputs,
            result: self.result,
            exit_code,
        };
        let path = self.out_dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        fs::write(&path, text).with_context(|| format!("writing {}", path.display())).map_err(io)
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn instance_hash(inst: &PipelineInstance) -> String {
    hex::encode(Sha256::digest(serialize_instance(inst).as_bytes()))
}

fn load(source: &Source) -> Result<PipelineInstance, Failure> {
    match (&source.builtin, &source.instance) {
        (Some(b), _) => Ok(builtin_instance(*b)),
        (None, Some(path)) => {
            let bytes = fs::read(path).with_context(|| format!("reading {}", path.display())).map_err(io)?;
            load_instance(&bytes).with_context(|| format!("loading {}", path.display())).map_err(io)
        }
        (None, None) => Err(io(anyhow!("one of --builtin or --instance is required"))),
    }
}

fn build(inst: &PipelineInstance) -> Result<MilpModel, Failure> {
    milp::build(inst).map_err(|e| Failure::new(EXIT_SOLVER, e))
}

fn solver_config(cli: &Cli) -> Result<SolverConfig, Failure> {
    let mut cfg = match &cli.solver_cmd {
        Some(t) if !t.trim().is_empty() => SolverConfig::with_template(t),
        _ => SolverConfig::default(),
    };
    cfg.gap = cli.gap;
    cfg.time_limit = cli.time_limit;
    cfg.threads = cli.threads;
    if let Some(dir) = &cli.keep_workdir {
        cfg.workdir = WorkdirPolicy::Keep(dir.clone());
    }
    cfg.validate().map_err(|e| Failure::new(EXIT_SOLVER, e))?;
    Ok(cfg)
}

fn status_code(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::Optimal | SolveStatus::FeasibleWithinGap => 0,
        SolveStatus::Infeasible => EXIT_INFEASIBLE,
        SolveStatus::TimeLimitNoIncumbent | SolveStatus::Error => EXIT_SOLVER,
    }
}

fn solution_json(model: &MilpModel, sol: &Solution) -> Value {
    let values: serde_json::Map<String, Value> = model
        .variables
        .iter()
        .zip(&sol.values)
        .filter(|(_, x)| **x != 0.0)
        .map(|(v, x)| (v.name.clone(), json!(x)))
        .collect();
    json!({
        "status": sol.status.as_str(),
        "objective": sol.objective,
        "bound": sol.bound,
        "gap": sol.gap,
        "values": values,
    })
}

fn summary(sol: &Solution) -> Value {
    json!({ "status": sol.status.as_str(), "objective": sol.objective, "gap": sol.gap })
}

fn cmd_solve(cli: &Cli, run: &mut Run, inst: &PipelineInstance) -> Outcome {
    let cfg = solver_config(cli)?;
    run.solver = Some(cfg.clone());
    let model = build(inst)?;
    let sol = solver::solve(&model, &cfg).map_err(solver_failure)?;
    run.result = summary(&sol);
    run.write("solution.json", pretty(&solution_json(&model, &sol)))?;
    let code = status_code(sol.status);
    if code != 0 {
        eprintln!("solver finished with status {}", sol.status);
        return Ok(code);
    }
    let schedule = extract_schedule(inst, &model, &sol).map_err(|e| Failure::new(EXIT_SOLVER, e))?;
    let plan = schedule.to_plan(inst);
    run.write("plan.json", plan.to_json())?;
    run.write("schedule.json", render_report(inst, &schedule, ReportFormat::Json))?;
    run.write("gantt.json", render_report(inst, &schedule, ReportFormat::GanttJson))?;
    run.write("report.txt", render_report(inst, &schedule, ReportFormat::Text))?;
    print!("{}", String::from_utf8_lossy(&render_report(inst, &schedule, cli.format)));

    let costs = cost_breakdown(inst, &schedule);
    run.result["report_total"] = json!(costs.total);
    run.result["backorder_volume"] = json!(costs.backorder_volume());
    let report = check(inst, &schedule.to_resolved_plan(inst));
    if !report.is_empty() {
        eprintln!("extracted schedule fails validation:\n{report}");
        run.write("violations.json", pretty(&serde_json::to_value(&report.violations).expect("json")))?;
        return Ok(EXIT_VIOLATIONS);
    }
    Ok(0)
}

fn solver_failure(e: SolverError) -> Failure {
    Failure::new(EXIT_SOLVER, e)
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json") + "\n"
}

#[derive(Serialize)]
struct SweepRow {
    coefficient: f64,
    status: String,
    backorder_volume: Option<f64>,
    objective: Option<f64>,
    error: Option<String>,
}

fn cmd_sweep(cli: &Cli, run: &mut Run, inst: &PipelineInstance, coefficients: &[f64]) -> Outcome {
    let cfg = solver_config(cli)?;
    run.solver = Some(cfg.clone());
    let mut coefficients = coefficients.to_vec();
    coefficients.sort_by(f64::total_cmp);
    let mut model = build(inst)?;
    let mut rows = Vec::new();
    for &c in &coefficients {
        milp::set_backorder_cost(&mut model, c);
        let mut priced = inst.clone();
        priced.set_backorder_cost(c);
        let row = match solver::solve(&model, &cfg) {
            Ok(sol) if sol.status.has_incumbent() => match extract_schedule(&priced, &model, &sol) {
                Ok(s) => SweepRow {
                    coefficient: c,
                    status: sol.status.as_str().into(),
                    backorder_volume: Some(cost_breakdown(&priced, &s).backorder_volume()),
                    objective: sol.objective,
                    error: None,
                },
                Err(e) => SweepRow {
                    coefficient: c,
                    status: sol.status.as_str().into(),
                    backorder_volume: None,
                    objective: sol.objective,
                    error: Some(e.to_string()),
                },
            },
            Ok(sol) => SweepRow {
                coefficient: c,
                status: sol.status.as_str().into(),
                backorder_volume: None,
                objective: None,
                error: None,
            },
            Err(e) => SweepRow {
                coefficient: c,
                status: SolveStatus::Error.as_str().into(),
                backorder_volume: None,
                objective: None,
                error: Some(e.to_string()),
            },
        };
        eprintln!(
            "coefficient {}: {} backorder {} objective {}",
            c,
            row.status,
            opt(row.backorder_volume),
            opt(row.objective)
        );
        rows.push(row);
    }
    let mut csv = String::from("coefficient,status,backorder_volume,objective\n");
    for r in &rows {
        csv += &format!("{},{},{},{}\n", r.coefficient, r.status, opt(r.backorder_volume), opt(r.objective));
    }
    run.write("sweep.csv", &csv)?;
    let doc = json!({
        "rows": rows,
        "series": {
            "coefficient": rows.iter().map(|r| r.coefficient).collect::<Vec<_>>(),
            "backorder_volume": rows.iter().map(|r| r.backorder_volume).collect::<Vec<_>>(),
            "objective": rows.iter().map(|r| r.objective).collect::<Vec<_>>(),
        },
    });
    run.write("sweep.json", pretty(&doc))?;
    match cli.format {
        ReportFormat::Text => print!("{csv}"),
        _ => print!("{}", pretty(&doc)),
    }
    let failed = rows.iter().filter(|r| r.objective.is_none() || r.error.is_some()).count();
    run.result = json!({ "rows": rows.len(), "failed": failed });
    Ok(if failed > 0 { EXIT_SOLVER } else { 0 })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn cmd_validate(cli: &Cli, run: &mut Run, inst: &PipelineInstance, path: &Path) -> Outcome {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display())).map_err(io)?;
    let plan = OperatingPlan::from_json(&bytes)
        .with_context(|| format!("loading {}", path.display()))
        .map_err(io)?;
    let resolved = resolve(inst, &plan)
        .with_context(|| format!("plan {} does not fit instance {}", path.display(), inst.name))
        .map_err(io)?;
    let report = check(inst, &resolved);
    let doc = json!({
        "feasible": report.is_empty(),
        "violations": report.violations,
    });
    run.write("violations.json", pretty(&doc))?;
    match cli.format {
        ReportFormat::Text if report.is_empty() => println!("plan is feasible"),
        ReportFormat::Text => print!("{report}"),
        _ => print!("{}", pretty(&doc)),
    }
    run.result = json!({ "violations": report.violations.len() });
    Ok(if report.is_empty() { 0 } else { EXIT_VIOLATIONS })
}

fn cmd_export(run: &mut Run, inst: &PipelineInstance) -> Outcome {
    let model = build(inst)?;
    let path = run.write(&format!("{}.mps", inst.name), solver::export_mps(&model))?;
    let stats = model.stats();
    run.result = serde_json::to_value(&stats).expect("json");
    println!("{}", path.display());
    Ok(0)
}

fn cmd_examples(run: &mut Run) -> Outcome {
    for name in BuiltinName::ALL {
        let path = run.write(&format!("{name}.json"), serialize_instance(&builtin_instance(name)))?;
        println!("{}", path.display());
    }
    Ok(0)
}

fn cmd_stats(cli: &Cli, run: &mut Run, inst: &PipelineInstance) -> Outcome {
    let stats = build(inst)?.stats();
    let v = serde_json::to_value(&stats).expect("json");
    match cli.format {
        ReportFormat::Text => print!("{stats}"),
        _ => print!("{}", pretty(&v)),
    }
    run.result = v;
    Ok(0)
}

fn execute(cli: &Cli) -> Outcome {
    fs::create_dir_all(&cli.out_dir)
        .with_context(|| format!("creating {}", cli.out_dir.display()))
        .map_err(io)?;
    let (command, source) = match &cli.command {
        Command::Solve { source } => ("solve", Some(source)),
        Command::Sweep { source, .. } => ("sweep", Some(source)),
        Command::Validate { source, .. } => ("validate", Some(source)),
        Command::Export { source } => ("export", Some(source)),
        Command::Examples => ("examples", None),
        Command::Stats { source } => ("stats", Some(source)),
    };
    let mut run = Run {
        out_dir: cli.out_dir.clone(),
        command,
        instance: None,
        solver: None,
        started: now(),
        outputs: Vec::new(),
        result: Value::Null,
    };
    let inst = match source {
        Some(s) => {
            let inst = load(s)?;
            run.instance = Some((inst.name.clone(), instance_hash(&inst)));
            Some(inst)
        }
        None => None,
    };
    let outcome = match (&cli.command, &inst) {
        (Command::Solve { .. }, Some(i)) => cmd_solve(cli, &mut run, i),
        (Command::Sweep { coefficients, .. }, Some(i)) => cmd_sweep(cli, &mut run, i, coefficients),
        (Command::Validate { plan, .. }, Some(i)) => cmd_validate(cli, &mut run, i, plan),
        (Command::Export { .. }, Some(i)) => cmd_export(&mut run, i),
        (Command::Stats { .. }, Some(i)) => cmd_stats(cli, &mut run, i),
        _ => cmd_examples(&mut run),
    };
    let code = match &outcome {
        Ok(c) => *c,
        Err(f) => {
            run.result = json!({ "error": format!("{:#}", f.error) });
            f.code
        }
    };
    run.finish(code)?;
    outcome
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
