use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// An instance invariant that does not hold, located by a field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    pub path: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for ValidationError {}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("malformed instance: {0}")]
    Parse(#[source] serde_json::Error),
    #[error("invalid instance: {0}")]
    Validation(#[from] ValidationError),
}

#[derive(Debug, Error)]
#[error("model too large: {what} = {count} exceeds cap {cap}")]
pub struct ModelSizeError {
    pub what: &'static str,
    pub count: usize,
    pub cap: usize,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("failed to launch solver `{program}`: {source}")]
    Launch {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("solver I/O in {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("solution parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("inconsistent solution: {0}")]
    Inconsistent(String),
}

impl SolverError {
    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        SolverError::Parse {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("solution has status {0:?}; no schedule can be extracted")]
    NoIncumbent(crate::solver::SolveStatus),
    #[error("degenerate solution: binary {name} = {value}")]
    DegenerateSolution { name: String, value: f64 },
}

/// A plan that refers to nodes, batches or slots the instance does not have.
#[derive(Debug, Error)]
pub enum PlanError {
    #[error("malformed plan: {0}")]
    Parse(#[source] serde_json::Error),
    #[error("plan index out of range: {0}")]
    Index(String),
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("search space too large: more than {cap} candidates")]
    SearchSpaceTooLarge { cap: u64 },
    #[error("instance data not commensurate with quantum {quantum}: {what}")]
    NotCommensurate { quantum: f64, what: String },
}
