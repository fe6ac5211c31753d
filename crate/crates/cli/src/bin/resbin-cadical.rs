//! Minimal SAT-competition style front end for CaDiCaL.
//!
//! `resbin-cadical FILE.cnf` prints an `s` status line and, on SAT, `v`
//! lines, and exits with 10 (SAT), 20 (UNSAT) or 0 (unknown).

use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

fn main() -> ExitCode {
    let Some(path) = std::env::args().nth(1) else {
        eprintln!("usage: resbin-cadical FILE.cnf");
        return ExitCode::from(1);
    };
    let mut solver: cadical::Solver = cadical::Solver::new();
    let max_var = match solver.read_dimacs(Path::new(&path)) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("resbin-cadical: {e}");
            return ExitCode::from(1);
        }
    };
    let stdout = std::io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let code = match solver.solve() {
        Some(true) => {
            writeln!(out, "s SATISFIABLE").unwrap();
            let mut line = String::from("v");
            for var in 1..=max_var {
                let lit = if solver.value(var) == Some(true) { var } else { -var };
                line.push(' ');
                line.push_str(&lit.to_string());
                if line.len() > 70 {
                    writeln!(out, "{line}").unwrap();
                    line = String::from("v");
                }
            }
            writeln!(out, "{line} 0").unwrap();
            10
        }
        Some(false) => {
            writeln!(out, "s UNSATISFIABLE").unwrap();
            20
        }
        None => {
            writeln!(out, "s UNKNOWN").unwrap();
            0
        }
    };
    out.flush().unwrap();
    ExitCode::from(code)
}
