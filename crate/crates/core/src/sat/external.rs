//! External solvers: DIMACS in a temporary file, SAT-competition output
//! (`s ...` status line, `v ...` value lines) back.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::sync::atomic::Ordering;
use std::thread;
use std::time::Duration;

use web_time::Instant;

use super::{Budget, SatError, SolveResult, SolveStats, Status};
use crate::encode::{write_dimacs_to, CnfInstance};

const POLL: Duration = Duration::from_millis(5);

/// Parses solver stdout. The assignment covers every variable mentioned in
/// `v` lines; callers pad it to the instance size.
pub fn parse_solver_output(text: &str) -> Result<SolveResult, SatError> {
    let mut status = None;
    let mut values: Vec<(usize, bool)> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("s ") {
            status = Some(match rest.trim() {
                "SATISFIABLE" => Status::Sat,
                "UNSATISFIABLE" => Status::Unsat,
                "UNKNOWN" => Status::Unknown,
                other => return Err(SatError::OutputParseError(format!("unknown status {other:?}"))),
            });
        } else if let Some(rest) = line.strip_prefix('v') {
            for tok in rest.split_whitespace() {
                let lit: i64 = tok
                    .parse()
                    .map_err(|_| SatError::OutputParseError(format!("bad literal {tok:?}")))?;
                if lit != 0 {
                    values.push((lit.unsigned_abs() as usize, lit > 0));
                }
            }
        }
    }
    let status = status.ok_or_else(|| SatError::OutputParseError("missing status line".into()))?;
    let assignment = match status {
        Status::Sat => {
            let len = values.iter().map(|v| v.0).max().unwrap_or(0);
            let mut a = vec![false; len];
            for (var, value) in values {
                a[var - 1] = value;
            }
            Some(a)
        }
        _ => None,
    };
    let reason = (status == Status::Unknown).then(|| "solver reported UNKNOWN".to_string());
    Ok(SolveResult { status, assignment, stats: SolveStats::default(), reason })
}

/// Runs `command` (whitespace-separated, `{file}` replaced by the DIMACS
/// path, appended if absent) under the budget's timeout and cancel flag.
/// When no status line is printed, exit codes 10 and 20 are honored.
pub fn solve_external(cnf: &CnfInstance, command: &str, budget: &Budget) -> Result<SolveResult, SatError> {
    let start = Instant::now();
    let mut file = tempfile::Builder::new().prefix("resbin-").suffix(".cnf").tempfile()?;
    {
        let mut w = std::io::BufWriter::new(file.as_file_mut());
        write_dimacs_to(cnf, &mut w)?;
        w.flush()?;
    }
    let path = file.path().to_string_lossy().into_owned();
    let mut argv: Vec<String> = command.split_whitespace().map(str::to_string).collect();
    if argv.is_empty() {
        return Err(SatError::SolverSpawnError {
            command: command.into(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty command"),
        });
    }
    if argv.iter().any(|a| a.contains("{file}")) {
        for a in &mut argv {
            *a = a.replace("{file}", &path);
        }
    } else {
        argv.push(path);
    }
    let mut child = Command::new(&argv[0])
        .args(&argv[1..])
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|source| SatError::SolverSpawnError { command: command.into(), source })?;
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = thread::spawn(move || {
        let mut s = String::new();
        stdout.read_to_string(&mut s).map(|_| s)
    });

    let deadline = budget.timeout.map(|t| start + t);
    let stop_reason = loop {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            break Some("timeout");
        }
        if budget.cancel.as_ref().is_some_and(|c| c.load(Ordering::Relaxed)) {
            break Some("cancelled");
        }
        if child.try_wait()?.is_some() {
            break None;
        }
        thread::sleep(POLL);
    };
    if let Some(reason) = stop_reason {
        let _ = child.kill();
        let _ = child.wait();
        let _ = reader.join();
        let stats = SolveStats { wall: start.elapsed(), ..SolveStats::default() };
        return Ok(SolveResult::unknown(reason, stats));
    }
    let exit = child.wait()?;
    let text = reader.join().map_err(|_| SatError::OutputParseError("reader thread panicked".into()))??;
    let stats = SolveStats { wall: start.elapsed(), ..SolveStats::default() };

    let mut result = match parse_solver_output(&text) {
        Ok(r) => r,
        Err(e) => match exit.code() {
            Some(20) => SolveResult { status: Status::Unsat, assignment: None, stats: SolveStats::default(), reason: None },
            Some(10) => return Err(SatError::OutputParseError("exit code 10 but no model printed".into())),
            None => return Ok(SolveResult::unknown("solver crashed", stats)),
            _ => return Err(e),
        },
    };
    result.stats = stats;
    if let Some(a) = &mut result.assignment {
        if a.len() > cnf.num_vars() as usize {
            return Err(SatError::OutputParseError("model mentions unknown variables".into()));
        }
        a.resize(cnf.num_vars() as usize, false);
        if !cnf.satisfied_by(a) {
            return Err(SatError::OutputParseError("reported model does not satisfy the instance".into()));
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_status_lines() {
        let r = parse_solver_output("s UNSATISFIABLE\n").unwrap();
        assert_eq!((r.status, r.assignment), (Status::Unsat, None));
        let r = parse_solver_output("c hello\ns SATISFIABLE\nv 1 -2 0\n").unwrap();
        assert_eq!(r.status, Status::Sat);
        assert_eq!(r.assignment, Some(vec![true, false]));
        let r = parse_solver_output("s SATISFIABLE\nv 1 -2\nv 3 0\n").unwrap();
        assert_eq!(r.assignment, Some(vec![true, false, true]));
        assert!(matches!(parse_solver_output("garbage"), Err(SatError::OutputParseError(_))));
        assert!(matches!(parse_solver_output("s MAYBE\n"), Err(SatError::OutputParseError(_))));
    }

    #[test]
    fn missing_executable() {
        let cnf = CnfInstance::from_clauses(1, &[vec![1], vec![-1]]);
        let err = solve_external(&cnf, "/nonexistent", &Budget::default()).unwrap_err();
        assert!(matches!(err, SatError::SolverSpawnError { .. }));
    }

    #[cfg(unix)]
    #[test]
    fn shell_scripts_as_solvers() {
        let cnf = CnfInstance::from_clauses(2, &[vec![1, 2], vec![-1]]);
        let script = |body: &str| {
            let mut f = tempfile::Builder::new().suffix(".sh").tempfile().unwrap();
            writeln!(f, "#!/bin/sh\n{body}").unwrap();
            f.into_temp_path()
        };
        let sat = script("echo 's SATISFIABLE'; echo 'v -1 2 0'");
        let r = solve_external(&cnf, &format!("sh {} {{file}}", sat.display()), &Budget::default()).unwrap();
        assert_eq!(r.assignment, Some(vec![false, true]));

        let wrong = script("echo 's SATISFIABLE'; echo 'v 1 2 0'");
        let err = solve_external(&cnf, &format!("sh {}", wrong.display()), &Budget::default()).unwrap_err();
        assert!(matches!(err, SatError::OutputParseError(_)));

        let exit20 = script("exit 20");
        let r = solve_external(&cnf, &format!("sh {}", exit20.display()), &Budget::default()).unwrap();
        assert_eq!(r.status, Status::Unsat);

        let slow = script("sleep 5; echo 's UNSATISFIABLE'");
        let r = solve_external(&cnf, &format!("sh {}", slow.display()), &Budget::with_timeout(Duration::ZERO)).unwrap();
        assert_eq!((r.status, r.reason.as_deref()), (Status::Unknown, Some("timeout")));

        let reads_file = script("grep -q '^p cnf 2 2$' \"$1\" && echo 's UNSATISFIABLE'");
        let r = solve_external(&cnf, &format!("sh {} {{file}}", reads_file.display()), &Budget::default()).unwrap();
        assert_eq!(r.status, Status::Unsat);
    }
}
