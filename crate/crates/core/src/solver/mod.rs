//! External MILP solver backend: MPS export, process invocation and solution
//! parsing.
//!
//! A solver is described by an invocation template. Placeholders `{mps}`,
//! `{sol}`, `{timelimit}`, `{gap}` and `{threads}` are substituted per run;
//! `{script}` expands to the bundled HiGHS driver, written into the run's
//! working directory. The solution is read either in the native name/value
//! format or, for CBC, from CBC's own solution file.

mod mps;
mod solution;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::instance::{COST_TOL, VOLUME_TOL};
use crate::milp::MilpModel;

pub use mps::{export_mps, MAX_NAME_LEN};
pub use solution::{parse_cbc_solution, parse_solution, write_solution};

/// Environment variable overriding the default invocation template.
pub const SOLVER_CMD_ENV: &str = "PIPESCHED_SOLVER_CMD";

/// Default template: HiGHS through its Python bindings.
pub const DEFAULT_TEMPLATE: &str = "python3 {script} {mps} {sol} {timelimit} {gap} {threads}";

/// Template for a CBC executable found on `PATH`.
pub const CBC_TEMPLATE: &str = "cbc {mps} sec {timelimit} ratioGap {gap} threads {threads} solve solu {sol}";

const HIGHS_SCRIPT: &str = include_str!("highs_solve.py");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    FeasibleWithinGap,
    Infeasible,
    TimeLimitNoIncumbent,
    Error,
}

impl SolveStatus {
    pub fn has_incumbent(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::FeasibleWithinGap)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::FeasibleWithinGap => "feasible",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::TimeLimitNoIncumbent => "timelimit",
            SolveStatus::Error => "error",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolveStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "optimal" => SolveStatus::Optimal,
            "feasible" => SolveStatus::FeasibleWithinGap,
            "infeasible" => SolveStatus::Infeasible,
            "timelimit" => SolveStatus::TimeLimitNoIncumbent,
            "error" => SolveStatus::Error,
            other => return Err(format!("unknown status `{other}`")),
        })
    }
}

/// How the solver's output file is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Adapter {
    Native,
    Cbc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkdirPolicy {
    /// Fresh temporary directory removed after the run.
    Temp,
    /// Fresh subdirectory of the given path, left in place.
    Keep(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub template: String,
    pub adapter: Adapter,
    pub time_limit: f64,
    pub gap: f64,
    /// 0 lets the solver decide.
    pub threads: usize,
    pub workdir: WorkdirPolicy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            template: DEFAULT_TEMPLATE.to_string(),
            adapter: Adapter::Native,
            time_limit: 7200.0,
            gap: 0.0,
            threads: 0,
            workdir: WorkdirPolicy::Temp,
        }
    }
}

impl SolverConfig {
    /// Config for `template`. A `cbc:` or `native:` prefix selects the
    /// adapter explicitly; otherwise CBC is assumed when the program name
    /// contains `cbc`.
    pub fn with_template(template: &str) -> Self {
        let (adapter, template) = if let Some(t) = template.strip_prefix("cbc:") {
            (Adapter::Cbc, t)
        } else if let Some(t) = template.strip_prefix("native:") {
            (Adapter::Native, t)
        } else {
            let program = template.split_whitespace().next().unwrap_or("");
            let base = Path::new(program).file_name().and_then(|s| s.to_str()).unwrap_or("");
            let a = if base.contains("cbc") { Adapter::Cbc } else { Adapter::Native };
            (a, template)
        };
        Self {
            template: template.trim().to_string(),
            adapter,
            ..Self::default()
        }
    }

    /// Default config, honouring the environment override.
    pub fn from_env() -> Self {
        match std::env::var(SOLVER_CMD_ENV) {
            Ok(t) if !t.trim().is_empty() => Self::with_template(&t),
            _ => Self::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.time_limit > 0.0 && self.time_limit.is_finite()) {
            return Err(SolverError::Config(format!("time limit must be > 0, got {}", self.time_limit)));
        }
        if !(0.0..1.0).contains(&self.gap) {
            return Err(SolverError::Config(format!("gap must lie in [0, 1), got {}", self.gap)));
        }
        if self.template.split_whitespace().next().is_none() {
            return Err(SolverError::Config("empty solver command".into()));
        }
        Ok(())
    }

    fn argv(&self, script: &Path, mps: &Path, sol: &Path) -> Vec<String> {
        self.template
            .split_whitespace()
            .map(|tok| {
                tok.replace("{script}", &script.display().to_string())
                    .replace("{mps}", &mps.display().to_string())
                    .replace("{sol}", &sol.display().to_string())
                    .replace("{timelimit}", &format!("{}", self.time_limit))
                    .replace("{gap}", &format!("{}", self.gap))
                    .replace("{threads}", &self.threads.to_string())
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: SolveStatus,
    /// Objective recomputed from `values`; `None` without an incumbent.
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub gap: Option<f64>,
    /// Indexed by [`crate::milp::VarId`].
    pub values: Vec<f64>,
    /// Number of variables absent from the solution file and set to 0.
    pub defaulted: usize,
}

impl Solution {
    pub fn value(&self, model: &MilpModel, key: &crate::milp::VarRef) -> f64 {
        model.value(&self.values, key)
    }
}

/// Relative gap between an objective and a bound, as reported in manifests.
pub fn relative_gap(objective: f64, bound: f64) -> f64 {
    (objective - bound).abs() / objective.abs().max(1e-9)
}

/// Check a parsed solution against the model and fill in the recomputed
/// objective and gap. Solutions without an incumbent pass through unchanged.
pub fn verify(model: &MilpModel, mut sol: Solution, reported_objective: Option<f64>) -> Result<Solution, SolverError> {
    if !sol.status.has_incumbent() {
        return Ok(sol);
    }
    let bad = model.violations(&sol.values, VOLUME_TOL);
    if let Some(v) = bad.first() {
        return Err(SolverError::Inconsistent(format!(
            "{} violated by {:.3e} ({} violation(s) in total)",
            v.row,
            v.amount,
            bad.len()
        )));
    }
    let obj = model.objective_value(&sol.values);
    if let Some(rep) = reported_objective {
        if (rep - obj).abs() > COST_TOL * obj.abs().max(1.0) {
            return Err(SolverError::Inconsistent(format!(
                "reported objective {rep} differs from recomputed {obj}"
            )));
        }
    }
    sol.objective = Some(obj);
    if let Some(b) = sol.bound {
        sol.gap = Some(relative_gap(obj, b));
    }
    Ok(sol)
}

/// Export, run the configured solver and return the verified solution.
pub fn solve(model: &MilpModel, cfg: &SolverConfig) -> Result<Solution, SolverError> {
    cfg.validate()?;
    let tmp;
    let dir: PathBuf = match &cfg.workdir {
        WorkdirPolicy::Temp => {
            tmp = tempfile::Builder::new()
                .prefix("pipesched-")
                .tempdir()
                .map_err(|source| SolverError::Io {
                    path: std::env::temp_dir(),
                    source,
                })?;
            tmp.path().to_path_buf()
        }
        WorkdirPolicy::Keep(root) => {
            std::fs::create_dir_all(root).map_err(|source| SolverError::Io {
                path: root.clone(),
                source,
            })?;
            let d = tempfile::Builder::new()
                .prefix("solve-")
                .tempdir_in(root)
                .map_err(|source| SolverError::Io {
                    path: root.clone(),
                    source,
                })?;
            d.keep()
        }
    };
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SolverError::Io { path, source }
    };

    let mps = dir.join("model.mps");
    let sol_path = dir.join("model.sol");
    let script = dir.join("highs_solve.py");
    std::fs::write(&mps, export_mps(model)).map_err(io(&mps))?;
    if cfg.template.contains("{script}") {
        std::fs::write(&script, HIGHS_SCRIPT).map_err(io(&script))?;
    }

    let argv = cfg.argv(&script, &mps, &sol_path);
    let log = dir.join("solver.log");
    let log_file = std::fs::File::create(&log).map_err(io(&log))?;
    let err_file = log_file.try_clone().map_err(io(&log))?;
    let mut child = Command::new(&argv[0])
        .args(&argv[1..])
        .current_dir(&dir)
        .stdin(Stdio::null())
        .stdout(log_file)
        .stderr(err_file)
        .spawn()
        .map_err(|source| SolverError::Launch {
            program: argv[0].clone(),
            source,
        })?;

    // Hard stop well past the solver's own limit.
    let deadline = Instant::now() + Duration::from_secs_f64(cfg.time_limit * 1.5 + 60.0);
    let exit = loop {
        match child.try_wait().map_err(io(&log))? {
            Some(s) => break Some(s),
            None if Instant::now() > deadline => {
                let _ = child.kill();
                let _ = child.wait();
                break None;
            }
            None => std::thread::sleep(Duration::from_millis(20)),
        }
    };

    let text = match std::fs::read_to_string(&sol_path) {
        Ok(t) => t,
        Err(_) => {
            let status = if exit.is_none() {
                SolveStatus::TimeLimitNoIncumbent
            } else {
                SolveStatus::Error
            };
            return Ok(Solution {
                status,
                objective: None,
                bound: None,
                gap: None,
                values: vec![0.0; model.variables.len()],
                defaulted: model.variables.len(),
            });
        }
    };
    let (sol, reported) = match cfg.adapter {
        Adapter::Native => {
            let s = parse_solution(model, &text)?;
            let rep = s.objective;
            (s, rep)
        }
        Adapter::Cbc => {
            let s = parse_cbc_solution(model, &text)?;
            let rep = s.objective;
            (s, rep)
        }
    };
    verify(model, sol, reported)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adapter_inference() {
        assert_eq!(SolverConfig::with_template("/opt/bin/cbc {mps}").adapter, Adapter::Cbc);
        assert_eq!(SolverConfig::with_template(DEFAULT_TEMPLATE).adapter, Adapter::Native);
        let c = SolverConfig::with_template("cbc:mycbc {mps}");
        assert_eq!((c.adapter, c.template.as_str()), (Adapter::Cbc, "mycbc {mps}"));
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::default();
        assert!(c.validate().is_ok());
        c.gap = 1.0;
        assert!(c.validate().is_err());
        c.gap = 0.0;
        c.time_limit = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn placeholders_substituted() {
        let c = SolverConfig {
            time_limit: 30.0,
            gap: 0.01,
            threads: 2,
            ..SolverConfig::with_template("s {mps} --out={sol} {timelimit} {gap} {threads}")
        };
        let a = c.argv(Path::new("x.py"), Path::new("/w/m.mps"), Path::new("/w/m.sol"));
        assert_eq!(a, ["s", "/w/m.mps", "--out=/w/m.sol", "30", "0.01", "2"]);
    }

    #[test]
    fn missing_program_is_launch_error() {
        let m = MilpModel::new("empty");
        let c = SolverConfig::with_template("/nonexistent/solver-binary {mps}");
        assert!(matches!(solve(&m, &c), Err(SolverError::Launch { .. })));
    }

    #[test]
    fn status_round_trip() {
        for s in [
            SolveStatus::Optimal,
            SolveStatus::FeasibleWithinGap,
            SolveStatus::Infeasible,
            SolveStatus::TimeLimitNoIncumbent,
            SolveStatus::Error,
        ] {
            assert_eq!(s.as_str().parse::<SolveStatus>().unwrap(), s);
        }
    }
}
