//! External solver speaking SMT-LIB2 over a child-process pipe.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use super::backend::{BackendError, BackendFactory, CheckResult, SolverBackend};
use crate::logic::{smt, Var};
use crate::{Formula, Int, Valuation};

pub struct SmtLibBackend {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
    /// Declared variables per frame.
    frames: Vec<Vec<Var>>,
}

fn io(e: std::io::Error) -> BackendError {
    BackendError::Process(e.to_string())
}

/// Command-line flags that put known solvers into interactive SMT-LIB2 mode.
fn solver_args(path: &Path) -> Vec<&'static str> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    if name.starts_with("z3") {
        vec!["-in", "-smt2"]
    } else if name.starts_with("cvc") {
        vec!["--lang=smt2", "--incremental", "--produce-models"]
    } else {
        Vec::new()
    }
}

impl SmtLibBackend {
    pub fn spawn(path: &Path) -> Result<Self, BackendError> {
        let mut child = Command::new(path)
            .args(solver_args(path))
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| BackendError::Process(format!("{}: {e}", path.display())))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut b = SmtLibBackend { child, stdin, stdout, frames: vec![Vec::new()] };
        b.send("(set-option :print-success false)")?;
        b.send("(set-option :produce-models true)")?;
        b.send("(set-logic QF_LIA)")?;
        Ok(b)
    }

    fn send(&mut self, line: &str) -> Result<(), BackendError> {
        writeln!(self.stdin, "{line}").map_err(io)?;
        self.stdin.flush().map_err(io)
    }

    fn read_line(&mut self) -> Result<String, BackendError> {
        let mut line = String::new();
        if self.stdout.read_line(&mut line).map_err(io)? == 0 {
            return Err(BackendError::Process("solver closed its output".into()));
        }
        Ok(line.trim().to_string())
    }

    /// Reads one balanced s-expression, possibly spanning several lines.
    fn read_sexp(&mut self) -> Result<String, BackendError> {
        let mut text = String::new();
        let mut depth = 0i64;
        loop {
            let line = self.read_line()?;
            for c in line.chars() {
                match c {
                    '(' => depth += 1,
                    ')' => depth -= 1,
                    _ => {}
                }
            }
            text.push_str(&line);
            text.push('\n');
            if depth <= 0 && !text.trim().is_empty() {
                return Ok(text);
            }
        }
    }

    fn model(&mut self) -> Result<Valuation, BackendError> {
        let vars: Vec<Var> = self.frames.iter().flatten().cloned().collect();
        if vars.is_empty() {
            return Ok(Valuation::new());
        }
        let names: Vec<String> = vars.iter().map(|v| smt::symbol(v.name())).collect();
        self.send(&format!("(get-value ({}))", names.join(" ")))?;
        let text = self.read_sexp()?;
        if text.trim_start().starts_with("(error") {
            return Err(BackendError::Process(text.trim().to_string()));
        }
        let pairs = smt::parse_value_pairs(&text).map_err(|e| BackendError::Process(e.to_string()))?;
        let mut out = Valuation::new();
        for (v, name) in vars.iter().zip(&names) {
            let val = pairs.get(name.trim_matches('|')).cloned().unwrap_or_else(|| Int::from(0));
            out.insert(v.clone(), val);
        }
        Ok(out)
    }
}

impl SolverBackend for SmtLibBackend {
    fn push(&mut self) {
        self.frames.push(Vec::new());
        let _ = self.send("(push 1)");
    }

    fn pop(&mut self) {
        if self.frames.len() > 1 {
            self.frames.pop();
            let _ = self.send("(pop 1)");
        }
    }

    fn declare(&mut self, var: &Var, bounds: Option<(i64, i64)>) {
        if self.frames.iter().flatten().any(|v| v == var) {
            return;
        }
        let name = smt::symbol(var.name());
        let _ = self.send(&format!("(declare-const {name} Int)"));
        if let Some((lo, hi)) = bounds {
            let _ = self.send(&format!("(assert (and (<= {} {name}) (<= {name} {})))", smt_int(lo), smt_int(hi)));
        }
        self.frames.last_mut().unwrap().push(var.clone());
    }

    fn assert(&mut self, f: &Formula) -> Result<(), BackendError> {
        for v in f.free_vars() {
            self.declare(&v, None);
        }
        self.send(&format!("(assert {})", smt::term(f)))
    }

    fn check(&mut self) -> Result<CheckResult, BackendError> {
        self.send("(check-sat)")?;
        let answer = self.read_line()?;
        match answer.as_str() {
            "sat" => Ok(CheckResult::Sat(self.model()?)),
            "unsat" => Ok(CheckResult::Unsat),
            other => Err(BackendError::Unknown(other.to_string())),
        }
    }

    fn is_complete(&self) -> bool {
        true
    }
}

impl Drop for SmtLibBackend {
    fn drop(&mut self) {
        let _ = self.send("(exit)");
        let _ = self.child.wait();
    }
}

fn smt_int(v: i64) -> String {
    if v < 0 {
        format!("(- {})", -(v as i128))
    } else {
        v.to_string()
    }
}

/// Spawns one solver process per backend instance.
#[derive(Clone, Debug)]
pub struct SmtLibFactory {
    pub path: PathBuf,
}

impl BackendFactory for SmtLibFactory {
    fn create(&self) -> Result<Box<dyn SolverBackend>, BackendError> {
        Ok(Box::new(SmtLibBackend::spawn(&self.path)?))
    }

    fn describe(&self) -> String {
        self.path.display().to_string()
    }
}

/// Looks up `name` on `PATH`.
pub fn find_on_path(name: &str) -> Option<PathBuf> {
    let paths = std::env::var_os("PATH")?;
    std::env::split_paths(&paths).map(|d| d.join(name)).find(|p| p.is_file())
}
