//! Deciding CNF instances: a built-in DPLL solver for small instances and
//! any SAT-competition style solver run as an external process.

mod dpll;
#[cfg(not(target_arch = "wasm32"))]
mod external;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dpll::solve_builtin;
#[cfg(not(target_arch = "wasm32"))]
pub use external::{parse_solver_output, solve_external};

use crate::encode::CnfInstance;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Sat,
    Unsat,
    Unknown,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Sat => "SAT",
            Status::Unsat => "UNSAT",
            Status::Unknown => "UNKNOWN",
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub decisions: u64,
    pub propagations: u64,
    pub wall: Duration,
}

/// Answer of a solver. `assignment[i]` is the value of variable `i + 1` and
/// is present exactly when the status is SAT.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveResult {
    pub status: Status,
    pub assignment: Option<Vec<bool>>,
    pub stats: SolveStats,
    /// Why the answer is UNKNOWN.
    pub reason: Option<String>,
}

impl SolveResult {
    pub fn unknown(reason: impl Into<String>, stats: SolveStats) -> SolveResult {
        SolveResult { status: Status::Unknown, assignment: None, stats, reason: Some(reason.into()) }
    }
}

#[derive(Debug, Error)]
pub enum SatError {
    #[error("cannot run solver `{command}`: {source}")]
    SolverSpawnError { command: String, source: std::io::Error },
    #[error("cannot parse solver output: {0}")]
    OutputParseError(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Limits for a single solve call. A `None` field is unlimited.
#[derive(Clone, Debug, Default)]
pub struct Budget {
    pub max_decisions: Option<u64>,
    pub timeout: Option<Duration>,
    /// Set from outside to stop the search; the solve returns UNKNOWN.
    pub cancel: Option<Arc<AtomicBool>>,
}

impl Budget {
    pub fn with_timeout(timeout: Duration) -> Budget {
        Budget { timeout: Some(timeout), ..Budget::default() }
    }
}

/// `builtin`, or a command line for an external solver where `{file}`
/// stands for the DIMACS path (appended when absent).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SolverSpec {
    Builtin,
    External(String),
}

impl SolverSpec {
    pub fn solve(&self, cnf: &CnfInstance, budget: &Budget) -> Result<SolveResult, SatError> {
        match self {
            SolverSpec::Builtin => Ok(solve_builtin(cnf, budget)),
            #[cfg(not(target_arch = "wasm32"))]
            SolverSpec::External(cmd) => solve_external(cnf, cmd, budget),
            #[cfg(target_arch = "wasm32")]
            SolverSpec::External(cmd) => Err(SatError::SolverSpawnError {
                command: cmd.clone(),
                source: std::io::Error::new(std::io::ErrorKind::Unsupported, "no processes on this target"),
            }),
        }
    }
}

impl FromStr for SolverSpec {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<SolverSpec, Self::Err> {
        let s = s.trim();
        Ok(if s.is_empty() || s == "builtin" { SolverSpec::Builtin } else { SolverSpec::External(s.to_string()) })
    }
}

impl fmt::Display for SolverSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverSpec::Builtin => f.write_str("builtin"),
            SolverSpec::External(cmd) => f.write_str(cmd),
        }
    }
}

impl Serialize for SolverSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SolverSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(s.parse().expect("infallible"))
    }
}
