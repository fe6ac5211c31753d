use std::path::Path;
use std::process::{Command, Output};

use resbin::grid::load_results;
use resbin::oracle::oracle_search;
use resbin::{Law, SearchTask, Status};

fn resbin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_resbin")).args(args).env_remove("RB_SOLVER").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_accepts_an_oracle_model_and_rejects_a_broken_one() {
    let dir = tempfile::tempdir().unwrap();
    let task = SearchTask::new(2, [Law::LD], None).unwrap();
    let model = oracle_search(&task).unwrap().unwrap();
    let file = dir.path().join("twochain.json");
    std::fs::write(&file, model.to_json_string()).unwrap();
    assert_eq!(code(&resbin(&["check", path(&file)])), 0);
    assert_eq!(code(&resbin(&["check", path(&file), "--distributive", "--assume", "D1,D2"])), 0);
    assert_eq!(code(&resbin(&["check", path(&file), "--refute", "LD"])), 1);

    let mut json: serde_json::Value = serde_json::from_str(&model.to_json_string()).unwrap();
    json["ops"]["lres"][0][0] = 1.into();
    json["ops"]["lres"][1][1] = 0.into();
    std::fs::write(&file, json.to_string()).unwrap();
    let out = resbin(&["check", path(&file)]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("RES"));

    let axioms = dir.path().join("extra.txt");
    std::fs::write(&axioms, "# commutativity\nc: x * y = y * x\n").unwrap();
    std::fs::write(&file, model.to_json_string()).unwrap();
    let c = code(&resbin(&["check", path(&file), "--axioms", path(&axioms)]));
    assert!(c == 0 || c == 1);
}

#[test]
fn search_exit_codes() {
    assert_eq!(code(&resbin(&["search", "--size", "1", "--refute", "D1"])), 20);
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    let out = resbin(&["search", "--size", "4", "--refute", "D1", "--out", path(&model)]);
    assert_eq!(code(&out), 10, "{}", stdout(&out));
    assert_eq!(code(&resbin(&["check", path(&model), "--refute", "D1"])), 0);
}

#[test]
fn search_with_external_solver_from_env() {
    let out = Command::new(env!("CARGO_BIN_EXE_resbin"))
        .args(["search", "--size", "2", "--refute", "D2", "--assume", "D1"])
        .env("RB_SOLVER", env!("CARGO_BIN_EXE_resbin-cadical"))
        .output()
        .unwrap();
    let sat = oracle_search(&SearchTask::new(2, [Law::D1], Some(Law::D2)).unwrap()).unwrap().is_some();
    assert_eq!(code(&out), if sat { 10 } else { 20 });
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&resbin(&["search", "--size", "2", "--refute", "D9"])), 2);
    assert_eq!(code(&resbin(&["search", "--size", "2"])), 2);
    assert_eq!(code(&resbin(&["search", "--size", "2", "--refute", "D1", "--assume", "D1"])), 2);
    assert_eq!(code(&resbin(&["grid", "--min-size", "5", "--max-size", "3"])), 2);
    assert_eq!(code(&resbin(&["grid", "--max-size", "15"])), 2);
    assert_eq!(code(&resbin(&["grid", "--workers", "0"])), 2);
    assert_eq!(code(&resbin(&["grid", "--ld", "sometimes"])), 2);
    assert_eq!(code(&resbin(&["check", "/nonexistent.json"])), 2);
    assert_eq!(code(&resbin(&["frobnicate"])), 2);
}

#[test]
fn grid_of_implied_targets_honours_expectations_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("results");
    let out = resbin(&["grid", "--max-size", "3", "--ld", "assume", "--out", path(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let results = load_results(&out_dir).unwrap().results;
    assert_eq!(results.len(), 12);
    assert!(results.iter().all(|r| r.expect_unsat && r.status == Status::Unsat));

    let report = dir.path().join("report");
    assert_eq!(code(&resbin(&["report", "--in", path(&out_dir), "--out", path(&report)])), 0);
    let summary = std::fs::read_to_string(report.join("summary.tex")).unwrap();
    assert_eq!(summary.matches("\\section*").count(), 7);
}

#[test]
fn grid_finds_and_reports_witnesses() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("results");
    let out = resbin(&["grid", "--max-size", "4", "--targets", "D1", "--assume", "", "--out", path(&out_dir)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("witness at n="));
    let report = dir.path().join("report");
    assert_eq!(code(&resbin(&["report", "--in", path(&out_dir), "--out", path(&report)])), 0);
    let goal = report.join("refute-D1_assume-none");
    for f in ["meet.tex", "join.tex", "mult.tex", "lres.tex", "rres.tex", "hasse.dot", "hasse.tex"] {
        assert!(goal.join(f).exists(), "{f}");
    }
}

#[test]
fn encode_writes_dimacs_with_variable_map() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("t.cnf");
    let out = resbin(&["encode", "--size", "2", "--refute", "D3", "--assume", "D4,D5", "--dimacs", path(&file)]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&file).unwrap();
    assert!(text.starts_with("c "));
    assert!(text.contains("c map meet 0 0 1\n"));
    assert!(text.lines().any(|l| l.starts_with("p cnf ")));
}

#[test]
fn enumerate_counts() {
    let count = |args: &[&str]| stdout(&resbin(args)).trim().parse::<usize>().unwrap();
    assert_eq!(count(&["enumerate", "--size", "5", "--lattices", "--count-only", "--up-to-iso"]), 5);
    assert_eq!(count(&["enumerate", "--size", "4", "--lattices", "--count-only"]), 36);
    assert_eq!(count(&["enumerate", "--size", "2", "--count-only"]), 4);
    let listed = stdout(&resbin(&["enumerate", "--size", "2", "--up-to-iso"]));
    assert_eq!(listed.lines().count(), count(&["enumerate", "--size", "2", "--count-only", "--up-to-iso"]));
    assert_eq!(code(&resbin(&["enumerate", "--size", "4"])), 2);
}
