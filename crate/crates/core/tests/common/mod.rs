#![allow(dead_code)]

use std::path::PathBuf;

use termweave::ir::interp::{box_inputs, Interpreter, Limits, Outcome};
use termweave::ir::{parse_program, Program};

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

/// Corpus programs as `(file stem, program)`, sorted by file name.
pub fn corpus() -> Vec<(String, Program)> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .map(|e| e.expect("entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "tw"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let src = std::fs::read_to_string(&p).expect("readable");
            let prog = parse_program(&src).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            (p.file_stem().unwrap().to_string_lossy().into_owned(), prog)
        })
        .collect()
}

pub fn program(stem: &str) -> Program {
    corpus().into_iter().find(|(n, _)| n == stem).unwrap_or_else(|| panic!("no corpus program {stem}")).1
}

pub fn entry_arity(prog: &Program) -> usize {
    prog.procedure(&prog.entry).expect("entry").params.len()
}

/// Interpreter outcomes of the entry over `[lo, hi]^n`.
pub fn outcomes(prog: &Program, lo: i64, hi: i64) -> Vec<(Vec<i64>, Outcome)> {
    box_inputs(entry_arity(prog), lo, hi)
        .into_iter()
        .map(|i| {
            let o = Interpreter::new(prog, Limits::default()).run(&prog.entry, &i);
            (i, o)
        })
        .collect()
}

/// Whether every input in `[lo, hi]^n` terminates on every execution.
pub fn terminates_on_box(prog: &Program, lo: i64, hi: i64) -> bool {
    outcomes(prog, lo, hi).iter().all(|(_, o)| o.terminates())
}
