//! End-to-end tests of the command-line binary: exit codes, report lines,
//! dump round-trips and the external-solver process boundary (stubbed with
//! shell one-liners).

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_ocmdp")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

fn generate_catalog(dir: &Path, name: &str) -> (PathBuf, PathBuf, PathBuf) {
    let model = dir.join("model.ocmdp");
    let query = dir.join("query.txt");
    let strat = dir.join("strategy.strat");
    let out = run(&[
        "generate",
        "--catalog",
        name,
        "--out-model",
        model.to_str().unwrap(),
        "--out-query",
        query.to_str().unwrap(),
        "--out-strategy",
        strat.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    (model, query, strat)
}

#[test]
fn verify_catalog_example_exact() {
    let dir = tempfile::tempdir().unwrap();
    let (model, query, strat) = generate_catalog(dir.path(), "fig4");
    let smt = dir.path().join("sentence.smt2");
    let out = run(&[
        "verify",
        "--model",
        model.to_str().unwrap(),
        "--strategy",
        strat.to_str().unwrap(),
        "--query",
        query.to_str().unwrap(),
        "--smt-out",
        smt.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("answer: yes"), "{text}");
    assert!(text.contains("probability: 25/32"), "{text}");
    assert!(std::fs::read_to_string(&smt).unwrap().contains("(check-sat)"));

    // Raising the threshold flips the verdict and the exit code.
    let out = run(&[
        "verify",
        "--model",
        model.to_str().unwrap(),
        "--strategy",
        strat.to_str().unwrap(),
        "--query",
        query.to_str().unwrap(),
        "--theta",
        "13/16",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("answer: no"));
}

const DRIFTY_MODEL: &str = "\
states q
actions up down
trans q up +1 q:1
trans q down -1 q:1
";

const DRIFTY_STRATEGY: &str = "\
kind oeis
bound inf
interval 1-inf
  q: up:2/3 down:1/3
";

const DRIFTY_QUERY: &str = "\
objective selterm
targets q
bound inf
init q 1
theta 3/4
";

/// An upward-drifting walk keeps positive escape mass, so its bracket stays
/// wide and a threshold strictly inside it is inconclusive (exit 2). A
/// stubbed solver command then settles it through the emitted sentence.
#[test]
fn verify_inconclusive_and_solver_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "m.ocmdp", DRIFTY_MODEL);
    let strat = write(dir.path(), "s.strat", DRIFTY_STRATEGY);
    let query = write(dir.path(), "q.txt", DRIFTY_QUERY);
    let base = [
        "verify",
        "--model",
        model.to_str().unwrap(),
        "--strategy",
        strat.to_str().unwrap(),
        "--query",
        query.to_str().unwrap(),
    ];
    let out = run(&base);
    assert_eq!(out.status.code(), Some(2), "{}", stdout(&out));
    assert!(stdout(&out).contains("answer: inconclusive"));

    let mut with_solver = base.to_vec();
    with_solver.extend(["--solver-cmd", "echo unsat"]);
    let out = run(&with_solver);
    assert_eq!(out.status.code(), Some(0));

    let mut with_solver = base.to_vec();
    with_solver.extend(["--solver-cmd", "echo sat"]);
    let out = run(&with_solver);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn realise_pure_parameterised_finds_witness() {
    let dir = tempfile::tempdir().unwrap();
    let (model, query, _) = generate_catalog(dir.path(), "fig4");
    let out = run(&[
        "realise-pure",
        "--model",
        model.to_str().unwrap(),
        "--query",
        query.to_str().unwrap(),
        "--d",
        "2",
        "--n",
        "1",
        "--theta",
        "7/8",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("answer: yes"));
    assert!(text.contains("witness:"));
    assert!(text.contains("probability: 7/8"));

    // Impossible parameters: trivially negative.
    let out = run(&[
        "realise-pure",
        "--model",
        model.to_str().unwrap(),
        "--query",
        query.to_str().unwrap(),
        "--d",
        "1",
        "--n",
        "1",
        "--theta",
        "1/2",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn realise_rand_writes_scripts() {
    let dir = tempfile::tempdir().unwrap();
    let (model, query, _) = generate_catalog(dir.path(), "fig4");
    let smt_dir = dir.path().join("scripts");
    let out = run(&[
        "realise-rand",
        "--model",
        model.to_str().unwrap(),
        "--query",
        query.to_str().unwrap(),
        "--partition",
        "1-2",
        "--smt-dir",
        smt_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("probability: 25/32"));
    let scripts: Vec<_> = std::fs::read_dir(&smt_dir).unwrap().collect();
    assert_eq!(scripts.len(), 3);
}

#[test]
fn compress_dump_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (model, query, strat) = generate_catalog(dir.path(), "fig4");
    let dump = dir.path().join("chain.txt");
    let out = run(&[
        "compress",
        "--model",
        model.to_str().unwrap(),
        "--strategy",
        strat.to_str().unwrap(),
        "--query",
        query.to_str().unwrap(),
        "--dump",
        dump.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&dump).unwrap();
    let (chain, names) = ocmdp::format::parse_chain(&text).unwrap();
    assert_eq!(ocmdp::format::print_chain(&chain, &names, None), text);
}

#[test]
fn emit_smt_writes_script() {
    let dir = tempfile::tempdir().unwrap();
    let (model, query, strat) = generate_catalog(dir.path(), "fig2a");
    let out_path = dir.path().join("verify.smt2");
    let out = run(&[
        "emit-smt",
        "--model",
        model.to_str().unwrap(),
        "--query",
        query.to_str().unwrap(),
        "--strategy",
        strat.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.starts_with("(set-logic QF_NRA)"));
    assert!(text.contains("(check-sat)"));

    // Exists-forall realisability sentence on stdout.
    let out = run(&[
        "emit-smt",
        "--model",
        model.to_str().unwrap(),
        "--query",
        query.to_str().unwrap(),
        "--partition",
        "1-7,8-inf",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("(forall ("));
}

#[test]
fn mealy_export_prints_table() {
    let dir = tempfile::tempdir().unwrap();
    let (model, _, strat) = generate_catalog(dir.path(), "fig1");
    let out = run(&[
        "mealy-export",
        "--model",
        model.to_str().unwrap(),
        "--strategy",
        strat.to_str().unwrap(),
        "--k-init",
        "1",
        "--full",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("memory 7")); // bound 8: counter values 1..=7
    assert!(text.contains("next"));
    assert!(text.contains("up"));
}

#[test]
fn generate_reductions() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.ocmdp");
    let query = dir.path().join("q.txt");
    let out = run(&[
        "generate",
        "--sqrt-sum",
        "2,3",
        "--y",
        "1",
        "--bounded",
        "--bound-override",
        "64",
        "--out-model",
        model.to_str().unwrap(),
        "--out-query",
        query.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let q = std::fs::read_to_string(&query).unwrap();
    assert!(q.contains("bound 64"));

    let out = run(&[
        "generate",
        "--hamiltonian",
        "0-1,1-2,2-0",
        "--vertices",
        "3",
        "--out-model",
        model.to_str().unwrap(),
        "--out-query",
        query.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let q = std::fs::read_to_string(&query).unwrap();
    assert!(q.contains("theta 1"));
}

#[test]
fn malformed_input_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "bad.ocmdp", "states q\nactions a\ntrans q a 2 q:1\n");
    let query = write(dir.path(), "q.txt", DRIFTY_QUERY);
    let out = run(&[
        "verify",
        "--model",
        model.to_str().unwrap(),
        "--strategy",
        model.to_str().unwrap(),
        "--query",
        query.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "{err}");

    // Unknown flags are usage errors.
    let out = run(&["verify", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn realise_pure_fixed_periodic_window() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.ocmdp");
    let query = dir.path().join("q.txt");
    let out = run(&[
        "generate",
        "--sqrt-sum",
        "2",
        "--y",
        "1",
        "--out-model",
        model.to_str().unwrap(),
        "--out-query",
        query.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&[
        "realise-pure",
        "--model",
        model.to_str().unwrap(),
        "--query",
        query.to_str().unwrap(),
        "--periodic",
        "period=2; window=1-1,2-2",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("answer: yes"));
    assert!(text.contains("kind cis"));
}
