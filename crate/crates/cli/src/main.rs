//! `resbin`: search, verify and render finite residuated binars.
//!
//! Exit codes: 0 success (or UNKNOWN for `search`), 1 verification failure
//! or grid violation, 2 usage or input error, 10 SAT and 20 UNSAT for
//! `search`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use resbin::algebra::{verify, FiniteBinar};
use resbin::dsl::{parse_axiom_file, parse_law_list, Identity};
use resbin::encode::{encode_search, write_dimacs_to};
use resbin::grid::{build_grid, load_results, minimal_witnesses, run_grid, solve_task, AssumptionPolicy, GridConfig, LdMode};
use resbin::oracle::{enumerate_lattices, enumerate_residuated_binars};
use resbin::report::report_bundle;
use resbin::sat::Budget;
use resbin::{EncodeOptions, Law, SearchTask, SolverSpec, Status};

#[derive(Parser)]
#[command(name = "resbin", version, about = "Finite model finder for residuated binars")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify a model file (lattice, residuation, identities).
    Check(CheckArgs),
    /// Search for one model of a given size.
    Search(SearchArgs),
    /// Run the independence grid over all targets and sizes.
    Grid(GridArgs),
    /// Write the CNF encoding of a task without solving it.
    Encode(EncodeArgs),
    /// Render a results directory as LaTeX/DOT.
    Report(ReportArgs),
    /// Enumerate small algebras exhaustively.
    Enumerate(EnumerateArgs),
}

#[derive(Args)]
struct TaskArgs {
    #[arg(long)]
    size: usize,
    /// Identity to violate: D1..D6 or LD.
    #[arg(long)]
    refute: Law,
    /// Comma-separated identities to assume, e.g. D2,D3.
    #[arg(long, default_value = "")]
    assume: String,
    /// Also assume lattice distributivity (LD).
    #[arg(long)]
    distributive: bool,
    /// Omit the static symmetry-breaking clauses.
    #[arg(long)]
    no_symmetry: bool,
}

impl TaskArgs {
    fn task(&self) -> Result<SearchTask> {
        let mut assume = parse_law_list(&self.assume)?;
        if self.distributive {
            assume.insert(Law::LD);
        }
        Ok(SearchTask::new(self.size, assume, Some(self.refute))?)
    }

    fn options(&self) -> EncodeOptions {
        EncodeOptions { symmetry: !self.no_symmetry, ..EncodeOptions::default() }
    }
}

#[derive(Args)]
struct CheckArgs {
    model: PathBuf,
    #[arg(long, default_value = "")]
    assume: String,
    #[arg(long)]
    refute: Option<Law>,
    #[arg(long)]
    distributive: bool,
    /// Extra identities to check, one per line (`name: lhs = rhs`).
    #[arg(long)]
    axioms: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    task: TaskArgs,
    /// `builtin` or an external command; `{file}` stands for the CNF path.
    #[arg(long, env = "RB_SOLVER", default_value = "builtin")]
    solver: SolverSpec,
    /// Wall-clock limit in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Write the model (JSON) here when one is found.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = 2)]
    min_size: usize,
    #[arg(long, default_value_t = 10)]
    max_size: usize,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// assume, omit or both.
    #[arg(long, default_value = "omit")]
    ld: LdMode,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long, env = "RB_SOLVER", default_value = "builtin")]
    solver: SolverSpec,
    /// Per-task wall-clock limit in seconds.
    #[arg(long, default_value_t = 3600.0)]
    timeout: f64,
    /// Comma-separated targets (default: D1..D6).
    #[arg(long)]
    targets: Option<String>,
    /// An explicit assumption set; repeat for several. Default: all
    /// identities other than the target.
    #[arg(long)]
    assume: Vec<String>,
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long)]
    dimacs: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EnumerateArgs {
    #[arg(long)]
    size: usize,
    #[arg(long)]
    count_only: bool,
    #[arg(long)]
    up_to_iso: bool,
    /// Enumerate lattices instead of residuated binars.
    #[arg(long)]
    lattices: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Check(a) => check(a),
        Command::Search(a) => search(a),
        Command::Grid(a) => grid(a),
        Command::Encode(a) => encode(a),
        Command::Report(a) => report(a),
        Command::Enumerate(a) => enumerate(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("resbin: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read_model(path: &Path) -> Result<FiniteBinar> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    FiniteBinar::from_json_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn check(a: CheckArgs) -> Result<u8> {
    let model = read_model(&a.model)?;
    let mut laws = parse_law_list(&a.assume)?;
    if a.distributive {
        laws.insert(Law::LD);
    }
    let mut assume: Vec<Identity> = laws.iter().map(|l| l.identity()).collect();
    if let Some(path) = &a.axioms {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        assume.extend(parse_axiom_file(&text)?);
    }
    let refute = a.refute.map(Law::identity);
    let report = verify(&model, &assume, refute.as_ref());
    if report.pass() {
        println!("PASS: n={} lattice, residuation and {} identities", model.size(), assume.len());
        Ok(0)
    } else {
        for v in &report.violations {
            println!("FAIL: {v}");
        }
        Ok(1)
    }
}

fn search(a: SearchArgs) -> Result<u8> {
    let task = a.task.task()?;
    let budget = Budget { timeout: a.timeout.map(Duration::from_secs_f64), ..Budget::default() };
    let result = match solve_task(&task, &a.solver, &budget, a.task.options()) {
        Ok(r) => r,
        Err(e) if e.starts_with("model failed verification") => {
            eprintln!("resbin: {e}");
            return Ok(1);
        }
        Err(e) => bail!(e),
    };
    println!("{task}: {} in {:.3}s", result.status, result.seconds);
    match result.status {
        Status::Sat => {
            let model = result.model.as_ref().expect("SAT carries a model");
            let json = model.to_json_string();
            match &a.out {
                Some(path) => std::fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?,
                None => println!("{json}"),
            }
            Ok(10)
        }
        Status::Unsat => Ok(20),
        Status::Unknown => {
            println!("reason: {}", result.reason.as_deref().unwrap_or("unknown"));
            Ok(0)
        }
    }
}

fn grid(a: GridArgs) -> Result<u8> {
    let mut config = GridConfig::new(&a.out);
    if let Some(t) = &a.targets {
        config.targets = parse_law_list(t)?.into_iter().collect();
    }
    if !a.assume.is_empty() {
        let sets: Vec<BTreeSet<Law>> = a.assume.iter().map(|s| parse_law_list(s)).collect::<Result<_, _>>()?;
        config.policy = AssumptionPolicy::Explicit(sets);
    }
    config.ld = a.ld;
    config.min_size = a.min_size;
    config.max_size = a.max_size;
    config.workers = a.workers;
    config.solver = a.solver;
    if !(a.timeout > 0.0 && a.timeout.is_finite()) {
        bail!("--timeout must be positive");
    }
    config.timeout = Duration::from_secs_f64(a.timeout);
    let tasks = build_grid(&config)?;
    eprintln!("{} tasks, results in {}", tasks.len(), config.out_dir.display());
    let summary = run_grid(&tasks, &config, |r| {
        let reason = r.reason.as_deref().map(|s| format!(" ({s})")).unwrap_or_default();
        eprintln!("{}: {} {:.2}s{reason}", r.task, r.status, r.seconds);
    })?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    let witnesses = minimal_witnesses(&summary.results);
    println!("{} new records, {} solver runs", summary.new_records, summary.solver_invocations);
    for (goal, r) in &witnesses {
        println!("{}: witness at n={}", goal.slug(), r.task.size);
    }
    for t in &summary.expect_unsat_violations {
        println!("VIOLATION: expected UNSAT, found model for {t}");
    }
    for e in &summary.internal_errors {
        println!("ERROR: {e}");
    }
    Ok(if summary.ok() { 0 } else { 1 })
}

fn encode(a: EncodeArgs) -> Result<u8> {
    let task = a.task.task()?;
    let cnf = encode_search(&task, a.task.options())?;
    let file = std::fs::File::create(&a.dimacs).with_context(|| format!("creating {}", a.dimacs.display()))?;
    let mut w = std::io::BufWriter::new(file);
    write_dimacs_to(&cnf, &mut w).with_context(|| format!("writing {}", a.dimacs.display()))?;
    println!("{task}: {} variables, {} clauses", cnf.num_vars(), cnf.num_clauses());
    Ok(0)
}

fn report(a: ReportArgs) -> Result<u8> {
    let loaded = load_results(&a.input)?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    let files = report_bundle(&loaded.results, &a.out)?;
    println!("wrote {} files to {}", files.len(), a.out.display());
    Ok(0)
}

fn enumerate(a: EnumerateArgs) -> Result<u8> {
    if a.lattices {
        let cat = enumerate_lattices(a.size, a.up_to_iso)?;
        if a.count_only {
            println!("{}", cat.lattices.len());
        } else {
            for l in &cat.lattices {
                println!("{}", serde_json::json!({ "meet": l.meet.rows(), "join": l.join.rows() }));
            }
        }
        return Ok(0);
    }
    let mut models = enumerate_residuated_binars(a.size)?;
    if a.up_to_iso {
        models = resbin::algebra::dedup_isomorphic(models);
    }
    if a.count_only {
        println!("{}", models.len());
    } else {
        for m in &models {
            println!("{}", m.to_json_string());
        }
    }
    Ok(0)
}
