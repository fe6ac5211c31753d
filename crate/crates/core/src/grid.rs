//! Independence-experiment grids: construction, parallel execution with
//! per-goal ascending sizes, and resumable JSONL persistence.
//!
//! A goal is a pair (assumptions, refuted identity). Its tasks differ only
//! in size and are dispatched smallest first; once one size is SAT, larger
//! sizes of the same goal are cancelled. A single coordinator owns the
//! queue and the results file, workers only see immutable tasks.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use web_time::Instant;

use crossbeam_channel::unbounded;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::FiniteBinar;
use crate::dsl::Law;
use crate::encode::{decode_model, encode_search, EncodeOptions, SearchTask};
use crate::sat::{Budget, SolverSpec, Status};

/// Sizes above this are rejected by [`GridConfig::validate`]; searches at
/// that scale have not been seen to terminate.
pub const SIZE_CEILING: usize = 14;

pub const RESULTS_FILE: &str = "results.jsonl";

/// The six known implications among D1..D6 in lattice-distributive
/// residuated binars: both premises together imply the conclusion.
pub const IMPLICATIONS: [([Law; 2], Law); 6] = [
    ([Law::D4, Law::D5], Law::D3),
    ([Law::D3, Law::D6], Law::D4),
    ([Law::D1, Law::D4], Law::D6),
    ([Law::D2, Law::D3], Law::D5),
    ([Law::D5, Law::D1], Law::D2),
    ([Law::D6, Law::D2], Law::D1),
];

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid grid configuration: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("corrupt results file {path} at line {line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GridError + '_ {
    move |source| GridError::Io { path: path.to_path_buf(), source }
}

/// Least fixpoint of [`IMPLICATIONS`] over `laws` (LD is ignored; the rules
/// presuppose it).
pub fn implication_closure(laws: &BTreeSet<Law>) -> BTreeSet<Law> {
    let mut closed: BTreeSet<Law> = laws.iter().copied().filter(|l| *l != Law::LD).collect();
    loop {
        let before = closed.len();
        for (premises, conclusion) in IMPLICATIONS {
            if premises.iter().all(|p| closed.contains(p)) {
                closed.insert(conclusion);
            }
        }
        if closed.len() == before {
            return closed;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AssumptionPolicy {
    /// Assume every distributivity identity except the target.
    AllOthers,
    /// Each listed set is one goal per target (sets containing LD are
    /// treated as if LD were governed by the LD mode).
    Explicit(Vec<BTreeSet<Law>>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LdMode {
    Assume,
    Omit,
    Both,
}

impl LdMode {
    fn flags(self) -> &'static [bool] {
        match self {
            LdMode::Assume => &[true],
            LdMode::Omit => &[false],
            LdMode::Both => &[false, true],
        }
    }
}

impl std::str::FromStr for LdMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "assume" => Ok(LdMode::Assume),
            "omit" => Ok(LdMode::Omit),
            "both" => Ok(LdMode::Both),
            _ => Err(format!("expected assume, omit or both, got {s:?}")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GridConfig {
    pub targets: Vec<Law>,
    pub policy: AssumptionPolicy,
    pub ld: LdMode,
    pub min_size: usize,
    pub max_size: usize,
    pub workers: usize,
    pub timeout: Duration,
    pub solver: SolverSpec,
    pub out_dir: PathBuf,
    pub encode: EncodeOptions,
}

impl GridConfig {
    pub fn new(out_dir: impl Into<PathBuf>) -> GridConfig {
        GridConfig {
            targets: Law::DISTRIBUTIVITY.to_vec(),
            policy: AssumptionPolicy::AllOthers,
            ld: LdMode::Omit,
            min_size: 2,
            max_size: 10,
            workers: 1,
            timeout: Duration::from_secs(3600),
            solver: SolverSpec::Builtin,
            out_dir: out_dir.into(),
            encode: EncodeOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<(), GridError> {
        let fail = |m: String| Err(GridError::Config(m));
        if self.targets.is_empty() {
            return fail("no targets".into());
        }
        if let Some(t) = self.targets.iter().find(|t| **t == Law::LD) {
            return fail(format!("{t} is not a valid target"));
        }
        if self.min_size < 1 || self.min_size > self.max_size || self.max_size > SIZE_CEILING {
            return fail(format!(
                "size range {}..={} must satisfy 1 <= min <= max <= {SIZE_CEILING}",
                self.min_size, self.max_size
            ));
        }
        if self.workers < 1 {
            return fail("at least one worker is required".into());
        }
        if let AssumptionPolicy::Explicit(sets) = &self.policy {
            if sets.is_empty() {
                return fail("explicit assumption policy without sets".into());
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Goal {
    pub assume: BTreeSet<Law>,
    pub refute: Option<Law>,
}

impl Goal {
    pub fn of(task: &SearchTask) -> Goal {
        Goal { assume: task.assume.clone(), refute: task.refute }
    }

    /// File-system friendly name, e.g. `refute-D3_assume-D4-D5-LD`.
    pub fn slug(&self) -> String {
        let assume: Vec<&str> = self.assume.iter().map(|l| l.name()).collect();
        let refute = self.refute.map_or("none", Law::name);
        if assume.is_empty() {
            format!("refute-{refute}_assume-none")
        } else {
            format!("refute-{refute}_assume-{}", assume.join("-"))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridTask {
    pub task: SearchTask,
    /// The refuted identity follows from the assumptions (LD assumed and
    /// the target lies in the implication closure): SAT would be a bug.
    pub expect_unsat: bool,
}

pub fn expects_unsat(task: &SearchTask) -> bool {
    task.distributive() && task.refute.is_some_and(|t| implication_closure(&task.assume).contains(&t))
}

/// Targets x assumption sets x LD modes x sizes, in that nesting order.
pub fn build_grid(config: &GridConfig) -> Result<Vec<GridTask>, GridError> {
    config.validate()?;
    let mut targets = config.targets.clone();
    targets.sort();
    targets.dedup();
    let mut out = Vec::new();
    for &target in &targets {
        let sets: Vec<BTreeSet<Law>> = match &config.policy {
            AssumptionPolicy::AllOthers => {
                vec![Law::DISTRIBUTIVITY.into_iter().filter(|l| *l != target).collect()]
            }
            AssumptionPolicy::Explicit(sets) => sets
                .iter()
                .map(|s| s.iter().copied().filter(|l| *l != Law::LD).collect())
                .collect(),
        };
        for set in sets {
            if set.contains(&target) {
                return Err(GridError::Config(format!("assumption set contains the target {target}")));
            }
            for &ld in config.ld.flags() {
                let mut assume = set.clone();
                if ld {
                    assume.insert(Law::LD);
                }
                for size in config.min_size..=config.max_size {
                    let task = SearchTask { size, assume: assume.clone(), refute: Some(target) };
                    let expect_unsat = expects_unsat(&task);
                    out.push(GridTask { task, expect_unsat });
                }
            }
        }
    }
    Ok(out)
}

/// One line of the results file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub task: SearchTask,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<FiniteBinar>,
    pub seconds: f64,
    pub solver: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default)]
    pub expect_unsat: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_seconds: Option<f64>,
}

/// Encodes, solves, decodes and verifies one task. A SAT answer whose model
/// fails verification is returned as `Err` with the violations.
pub fn solve_task(
    task: &SearchTask,
    solver: &SolverSpec,
    budget: &Budget,
    opts: EncodeOptions,
) -> Result<SearchResult, String> {
    let start = Instant::now();
    let cnf = encode_search(task, opts).map_err(|e| e.to_string())?;
    let answer = solver.solve(&cnf, budget).map_err(|e| e.to_string())?;
    let model = match (&answer.status, &answer.assignment) {
        (Status::Sat, Some(a)) => {
            let map = cnf.varmap.as_ref().expect("encoder attaches a varmap");
            let model = decode_model(a, map).map_err(|e| e.to_string())?;
            let report = task.verify(&model);
            if !report.pass() {
                let first: Vec<String> = report.violations.iter().take(3).map(|v| v.to_string()).collect();
                return Err(format!("model failed verification: {}", first.join("; ")));
            }
            Some(model)
        }
        _ => None,
    };
    Ok(SearchResult {
        task: task.clone(),
        status: answer.status,
        model,
        seconds: start.elapsed().as_secs_f64(),
        solver: solver.to_string(),
        reason: answer.reason,
        expect_unsat: expects_unsat(task),
        budget_seconds: budget.timeout.map(|t| t.as_secs_f64()),
    })
}

/// Results read back from a directory.
#[derive(Clone, Debug, Default)]
pub struct LoadedResults {
    pub results: Vec<SearchResult>,
    /// Non-fatal problems, such as a truncated final line.
    pub warnings: Vec<String>,
}

/// Reads `<dir>/results.jsonl`. A missing file is an empty set; an
/// unparsable final line (an interrupted write) is skipped with a warning;
/// an unparsable line elsewhere is an error.
pub fn load_results(dir: &Path) -> Result<LoadedResults, GridError> {
    let path = dir.join(RESULTS_FILE);
    let file = match File::open(&path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(LoadedResults::default()),
        Err(e) => return Err(io_err(&path)(e)),
    };
    let lines: Vec<String> = BufReader::new(file).lines().collect::<Result<_, _>>().map_err(io_err(&path))?;
    let mut out = LoadedResults::default();
    let last = lines.iter().rposition(|l| !l.trim().is_empty());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<SearchResult>(line) {
            Ok(r) => out.results.push(r),
            Err(e) if Some(i) == last => {
                let w = format!("{}: ignoring partial final line {}: {e}", path.display(), i + 1);
                log::warn!("{w}");
                out.warnings.push(w);
            }
            Err(e) => {
                return Err(GridError::Corrupt { path, line: i + 1, message: e.to_string() });
            }
        }
    }
    Ok(out)
}

/// Append-only writer for `<dir>/results.jsonl`.
pub struct ResultLog {
    path: PathBuf,
    file: File,
}

impl ResultLog {
    /// Opens for appending, creating the directory if needed. A trailing
    /// partial line left by a crash is cut off first.
    pub fn open(dir: &Path) -> Result<ResultLog, GridError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(RESULTS_FILE);
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)
            .map_err(io_err(&path))?;
        let contents = std::fs::read(&path).map_err(io_err(&path))?;
        if !contents.is_empty() && !contents.ends_with(b"\n") {
            let keep = contents.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
            file.set_len(keep as u64).map_err(io_err(&path))?;
            file.seek(SeekFrom::End(0)).map_err(io_err(&path))?;
        }
        Ok(ResultLog { path, file })
    }

    pub fn append(&mut self, result: &SearchResult) -> Result<(), GridError> {
        let mut line = serde_json::to_string(result).expect("results serialize");
        line.push('\n');
        self.file.write_all(line.as_bytes()).map_err(io_err(&self.path))?;
        self.file.flush().map_err(io_err(&self.path))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

pub fn persist_result(dir: &Path, result: &SearchResult) -> Result<(), GridError> {
    ResultLog::open(dir)?.append(result)
}

#[derive(Clone, Debug, Default)]
pub struct GridSummary {
    /// Every record in the results file after the run, old and new.
    pub results: Vec<SearchResult>,
    pub new_records: usize,
    pub solver_invocations: usize,
    /// Tasks flagged expect-UNSAT that came back SAT.
    pub expect_unsat_violations: Vec<SearchTask>,
    pub internal_errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl GridSummary {
    pub fn ok(&self) -> bool {
        self.expect_unsat_violations.is_empty() && self.internal_errors.is_empty()
    }

    /// Smallest SAT size per goal.
    pub fn witnesses(&self) -> BTreeMap<Goal, &SearchResult> {
        minimal_witnesses(&self.results)
    }
}

pub fn minimal_witnesses(results: &[SearchResult]) -> BTreeMap<Goal, &SearchResult> {
    let mut out: BTreeMap<Goal, &SearchResult> = BTreeMap::new();
    for r in results.iter().filter(|r| r.status == Status::Sat && r.model.is_some()) {
        let e = out.entry(Goal::of(&r.task)).or_insert(r);
        if r.task.size < e.task.size {
            *e = r;
        }
    }
    out
}

struct Job {
    task: GridTask,
    cancel: Arc<AtomicBool>,
}

struct Done {
    task: GridTask,
    outcome: Result<SearchResult, String>,
    invoked: bool,
}

#[derive(Default)]
struct GoalState {
    pending: VecDeque<GridTask>,
    in_flight: BTreeMap<usize, Arc<AtomicBool>>,
    solved_at: Option<usize>,
}

fn skipped(task: &GridTask, solved_at: usize, config: &GridConfig) -> SearchResult {
    SearchResult {
        task: task.task.clone(),
        status: Status::Unknown,
        model: None,
        seconds: 0.0,
        solver: config.solver.to_string(),
        reason: Some(format!("cancelled: goal solved at size {solved_at}")),
        expect_unsat: task.expect_unsat,
        budget_seconds: Some(config.timeout.as_secs_f64()),
    }
}

/// Runs `tasks` on `config.workers` threads, appending one record per task
/// to `<out_dir>/results.jsonl`. Tasks already recorded there are skipped.
/// `observer` sees every new record as it is written.
pub fn run_grid(
    tasks: &[GridTask],
    config: &GridConfig,
    mut observer: impl FnMut(&SearchResult),
) -> Result<GridSummary, GridError> {
    config.validate()?;
    let loaded = load_results(&config.out_dir)?;
    let mut log = ResultLog::open(&config.out_dir)?;
    let mut summary = GridSummary { warnings: loaded.warnings, ..GridSummary::default() };
    let done: HashSet<SearchTask> = loaded.results.iter().map(|r| r.task.clone()).collect();
    summary.results = loaded.results;

    let mut goals: BTreeMap<Goal, GoalState> = BTreeMap::new();
    for r in summary.results.iter().filter(|r| r.status == Status::Sat) {
        let g = goals.entry(Goal::of(&r.task)).or_default();
        g.solved_at = Some(g.solved_at.map_or(r.task.size, |s| s.min(r.task.size)));
    }
    let mut ordered: Vec<&GridTask> = tasks.iter().filter(|t| !done.contains(&t.task)).collect();
    ordered.sort_by_key(|t| (Goal::of(&t.task), t.task.size));
    for t in ordered {
        goals.entry(Goal::of(&t.task)).or_default().pending.push_back(t.clone());
    }

    let mut record = |r: SearchResult, summary: &mut GridSummary, log: &mut ResultLog| -> Result<(), GridError> {
        log.append(&r)?;
        observer(&r);
        summary.new_records += 1;
        summary.results.push(r);
        Ok(())
    };

    // sizes beyond an already recorded witness are never run
    for g in goals.values_mut() {
        if let Some(k) = g.solved_at {
            let (skip, keep): (Vec<GridTask>, Vec<GridTask>) = g.pending.drain(..).partition(|t| t.task.size > k);
            g.pending = keep.into();
            for t in skip {
                record(skipped(&t, k, config), &mut summary, &mut log)?;
            }
        }
    }

    let active_goals = goals.values().filter(|g| !g.pending.is_empty()).count().max(1);
    let window = (config.workers / active_goals).max(1);
    let (job_tx, job_rx) = unbounded::<Job>();
    let (done_tx, done_rx) = unbounded::<Done>();

    std::thread::scope(|scope| -> Result<(), GridError> {
        for _ in 0..config.workers {
            let job_rx = job_rx.clone();
            let done_tx = done_tx.clone();
            scope.spawn(move || {
                for job in job_rx {
                    let (outcome, invoked) = if job.cancel.load(Ordering::Relaxed) {
                        (Err("cancelled".to_string()), false)
                    } else {
                        let budget = Budget {
                            timeout: Some(config.timeout),
                            cancel: Some(job.cancel.clone()),
                            ..Budget::default()
                        };
                        (solve_task(&job.task.task, &config.solver, &budget, config.encode), true)
                    };
                    if done_tx.send(Done { task: job.task, outcome, invoked }).is_err() {
                        return;
                    }
                }
            });
        }
        drop(done_tx);
        drop(job_rx);

        let mut busy = 0usize;
        loop {
            while busy < config.workers {
                let next = goals.values_mut().find(|g| g.in_flight.len() < window && !g.pending.is_empty());
                let Some(g) = next else { break };
                let task = g.pending.pop_front().expect("nonempty");
                let cancel = Arc::new(AtomicBool::new(false));
                g.in_flight.insert(task.task.size, cancel.clone());
                job_tx.send(Job { task, cancel }).expect("workers alive");
                busy += 1;
            }
            if busy == 0 {
                break;
            }
            let done = done_rx.recv().expect("workers alive");
            busy -= 1;
            summary.solver_invocations += usize::from(done.invoked);
            let goal = Goal::of(&done.task.task);
            let size = done.task.task.size;
            let state = goals.get_mut(&goal).expect("known goal");
            state.in_flight.remove(&size);
            let mut result = match done.outcome {
                Ok(r) => r,
                Err(reason) => {
                    let cancelled = reason == "cancelled";
                    if !cancelled {
                        summary.internal_errors.push(format!("{}: {reason}", done.task.task));
                    }
                    SearchResult {
                        task: done.task.task.clone(),
                        status: Status::Unknown,
                        model: None,
                        seconds: 0.0,
                        solver: config.solver.to_string(),
                        reason: Some(reason),
                        expect_unsat: done.task.expect_unsat,
                        budget_seconds: Some(config.timeout.as_secs_f64()),
                    }
                }
            };
            if result.status == Status::Unknown && result.reason.as_deref() == Some("cancelled") {
                if let Some(k) = state.solved_at {
                    result.reason = Some(format!("cancelled: goal solved at size {k}"));
                }
            }
            if result.status == Status::Sat {
                if done.task.expect_unsat {
                    log::error!("expected UNSAT but found a model: {}", result.task);
                    summary.expect_unsat_violations.push(result.task.clone());
                }
                let k = state.solved_at.map_or(size, |s| s.min(size));
                state.solved_at = Some(k);
                for (&s, flag) in &state.in_flight {
                    if s > k {
                        flag.store(true, Ordering::Relaxed);
                    }
                }
                let (skip, keep): (Vec<GridTask>, Vec<GridTask>) =
                    state.pending.drain(..).partition(|t| t.task.size > k);
                state.pending = keep.into();
                record(result, &mut summary, &mut log)?;
                for t in skip {
                    record(skipped(&t, k, config), &mut summary, &mut log)?;
                }
            } else {
                record(result, &mut summary, &mut log)?;
            }
        }
        drop(job_tx);
        Ok(())
    })?;
    Ok(summary)
}
