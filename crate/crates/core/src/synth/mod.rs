//! Template-based predicate synthesis.

pub mod backend;
pub mod brute;
mod cegis;
pub mod finite;
pub mod smtlib;
pub mod template;

use thiserror::Error;

pub use backend::{BackendError, BackendFactory, CheckResult, Pref, SolverBackend};
pub use brute::{brute_force_solve, BruteLimits, BruteOutcome};
pub use cegis::{
    cegis_solve, ground_constraint, verify_solution, Budget, CegisOutcome, Objective, PredicateSolution, Solution,
    Status, Subproblem, Verification,
};
pub use finite::{FiniteBackend, FiniteFactory};
pub use smtlib::{SmtLibBackend, SmtLibFactory};
pub use template::{Domain, Ranking, Template, TemplateConfig};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SynthError {
    #[error("missing template parameter `{0}`")]
    MissingParameter(String),
    #[error("`{0}` is not an instance of a ranking template")]
    ShapeViolation(String),
    #[error("no interpretation for `{0}`")]
    Unfixed(String),
    #[error("evaluation: {0}")]
    Eval(String),
    #[error("search space too large: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}
