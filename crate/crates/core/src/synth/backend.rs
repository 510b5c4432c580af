//! Quantifier-free solver interface modelled on incremental SMT-LIB2 use.

use thiserror::Error;

use crate::logic::Var;
use crate::{Formula, Valuation};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("solver process: {0}")]
    Process(String),
    #[error("solver answered `{0}`")]
    Unknown(String),
    #[error("unsupported formula: {0}")]
    Unsupported(String),
    #[error("search limit reached")]
    Exhausted,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CheckResult {
    Sat(Valuation),
    Unsat,
}

/// Value ordering hint for model search; solvers may ignore it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pref {
    /// Values closest to zero first.
    Zero,
    /// Values closest to the given target first.
    Toward(i64),
}

pub trait SolverBackend: Send {
    fn push(&mut self);
    fn pop(&mut self);
    /// Declares an integer variable, optionally bounded (inclusive).
    fn declare(&mut self, var: &Var, bounds: Option<(i64, i64)>);
    fn assert(&mut self, f: &Formula) -> Result<(), BackendError>;
    fn check(&mut self) -> Result<CheckResult, BackendError>;
    fn prefer(&mut self, _var: &Var, _pref: Pref) {}
    /// Whether unbounded variables range over all integers.
    fn is_complete(&self) -> bool;
}

/// Creates fresh backend instances, one per subproblem.
pub trait BackendFactory: Send + Sync {
    fn create(&self) -> Result<Box<dyn SolverBackend>, BackendError>;
    fn describe(&self) -> String;
}
