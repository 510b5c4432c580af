mod common;

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn termweave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_termweave")).env_remove("TERMWEAVE_SOLVER").args(args).output().expect("runs")
}

fn corpus_file(stem: &str) -> String {
    common::corpus_dir().join(format!("{stem}.tw")).to_string_lossy().into_owned()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

#[test]
fn terminating_program_exits_zero() {
    let o = termweave(&["analyze", &corpus_file("01_countdown"), "--no-timing"]);
    assert_eq!(o.status.code(), Some(0));
    let r = json(&o);
    assert_eq!(r["verdict"], "Terminating");
    assert_eq!(r["mode"], "procedural");
    assert!(r.get("wall_ms").is_none());
    assert!(r["predicates"]["RR_main"].as_str().is_some());
    assert_eq!(r["digest"].as_str().unwrap().len(), 64);
}

#[test]
fn nonterminating_program_exits_ten() {
    let o = termweave(&["analyze", &corpus_file("07_forever")]);
    assert_eq!(o.status.code(), Some(10));
    assert_eq!(json(&o)["verdict"], "Unknown");
}

#[test]
fn usage_and_input_errors_exit_two() {
    let countdown = corpus_file("01_countdown");
    for args in [
        vec!["analyze"],
        vec!["analyze", "/no/such/file.tw"],
        vec!["analyze", &countdown, "--mode", "sideways"],
        vec!["analyze", &countdown, "--ranking", "lex:0"],
        vec!["analyze", &countdown, "--domain", "octagon"],
        vec!["analyze", &countdown, "--box", "3", "1"],
        vec!["analyze", &countdown, "--backend", "/no/such/solver"],
        vec!["analyze", &countdown, "--precond", "nowhere"],
        vec!["frobnicate"],
    ] {
        let o = termweave(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn unparsable_input_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.tw");
    std::fs::write(&bad, "proc main( {").unwrap();
    let o = termweave(&["analyze", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.tw"));
}

#[test]
fn solver_variable_is_the_backend_fallback() {
    let o = Command::new(env!("CARGO_BIN_EXE_termweave"))
        .env("TERMWEAVE_SOLVER", "/no/such/solver")
        .args(["analyze", &corpus_file("01_countdown")])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_termweave"))
        .env("TERMWEAVE_SOLVER", "/no/such/solver")
        .args(["analyze", "--backend", "builtin", &corpus_file("01_countdown")])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn several_modes_give_one_report_each_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = termweave(&[
        "analyze",
        &corpus_file("03_const_arg"),
        "--mode",
        "monolithic",
        "--mode",
        "scc-min",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let modes: Vec<&str> = r.as_array().unwrap().iter().map(|x| x["mode"].as_str().unwrap()).collect();
    assert_eq!(modes, ["monolithic", "scc-min"]);
}

#[test]
fn precondition_lands_in_the_report() {
    let o = termweave(&["analyze", &corpus_file("09_conditional"), "--precond", "main"]);
    assert_eq!(o.status.code(), Some(10));
    let p = &json(&o)["preconditions"]["main"];
    assert_eq!(p["certified"], true);
    assert_eq!(p["bounds"]["x"], serde_json::json!([0, null]));
}

#[test]
fn refinement_flag_certifies_the_unroll_case() {
    let f = corpus_file("10_unroll");
    assert_eq!(termweave(&["analyze", &f]).status.code(), Some(10));
    let o = termweave(&["analyze", &f, "--refine"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["decided_by"], "unroll 1");
}

#[test]
fn lexicographic_ranking_certifies_nested_loops() {
    let o = termweave(&["analyze", &corpus_file("02_nested"), "--ranking", "lex:2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["config"]["template"]["ranking"], serde_json::json!({"lexicographic": 2}));
}

#[test]
fn compare_isolates_unparsable_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(corpus_file("01_countdown"), dir.path().join("a.tw")).unwrap();
    std::fs::write(dir.path().join("b.tw"), "proc main( {").unwrap();
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let o = termweave(&[
        "analyze",
        "--compare",
        "--mode",
        "monolithic",
        "--mode",
        "procedural",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let c = json(&o);
    let rows = c["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["verdict"], "Terminating");
    assert_eq!(rows[2]["program"], "b.tw");
    assert!(rows[2]["error"].as_str().is_some());
    assert!(c["soundness_alarms"].as_array().unwrap().is_empty());
}

#[test]
fn compare_on_empty_directory_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let o = termweave(&["analyze", "--compare", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["rows"], serde_json::json!([]));
}

#[test]
fn compare_corpus_has_one_row_per_program_and_mode() {
    let dir = common::corpus_dir();
    let o = termweave(
        &["analyze", "--compare", "--mode", "monolithic", "--mode", "procedural", "--jobs", "4", "--no-timing"]
            .into_iter()
            .chain([dir.to_str().unwrap()])
            .collect::<Vec<_>>(),
    );
    assert_eq!(o.status.code(), Some(0));
    let c = json(&o);
    assert_eq!(c["rows"].as_array().unwrap().len(), 24);
    assert!(c["soundness_alarms"].as_array().unwrap().is_empty());
    let loss: Vec<&str> =
        c["precision_loss"].as_array().unwrap().iter().map(|f| f["program"].as_str().unwrap()).collect();
    assert_eq!(loss, ["05_recursion.tw"]);
    assert!(Path::new(&dir).is_dir());
}
