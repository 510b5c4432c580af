//! End-to-end analysis: lower, encode, schedule, solve, verify, refine.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::expand::{inline_calls, unroll_loops};
use super::graph::{build_dep_graph, schedule_weighted, Capacity, DepGraph, Fixpoint, Mode, Schedule};
use super::solve::{gfp_iterate, solve_group, GroupOutcome, SolveSettings};
use crate::encode::{build_constraints, ConstraintSystem};
use crate::ir::{program_to_string, Program};
use crate::logic::{smt, Sym, Var};
use crate::synth::{
    verify_solution, BackendFactory, Budget, Objective, Solution, Template, TemplateConfig, Verification,
};
use crate::{Interpretation, Lambda};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Verdict {
    Terminating,
    Unknown,
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub capacity: Capacity,
    pub template: TemplateConfig,
    pub budget: Budget,
    pub gfp_max_iters: usize,
    pub refine: bool,
    pub max_unroll: usize,
    pub max_inline: usize,
    /// Record wall-clock times in the report.
    pub timing: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mode: Mode::Procedural,
            capacity: Capacity::default(),
            template: TemplateConfig::default(),
            budget: Budget::default(),
            gfp_max_iters: 10,
            refine: false,
            max_unroll: 1,
            max_inline: 1,
            timing: true,
        }
    }
}

impl PipelineConfig {
    fn settings(&self) -> SolveSettings {
        SolveSettings { template: self.template, budget: self.budget, gfp_max_iters: self.gfp_max_iters }
    }
}

/// Configuration echoed into the report.
#[derive(Clone, Debug, Serialize)]
pub struct ConfigEcho {
    pub mode: Mode,
    pub capacity: Capacity,
    pub template: TemplateConfig,
    pub budget_iters: usize,
    pub budget_secs: u64,
    pub seed: u64,
    pub gfp_max_iters: usize,
    pub refine: bool,
    pub max_unroll: usize,
    pub max_inline: usize,
    pub backend: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GroupStatus {
    Solved,
    /// Fixpoint block stopped at its round limit.
    Widened,
    Failed,
    /// Not attempted because an earlier group failed.
    Skipped,
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupReport {
    pub index: usize,
    pub predicates: Vec<String>,
    pub objective: Objective,
    pub fixpoint: Fixpoint,
    pub status: GroupStatus,
    pub rounds: usize,
    pub cegis_iters: usize,
    pub counterexamples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AttemptReport {
    /// `base`, `re-composition`, `unroll k` or `inline d`.
    pub label: String,
    pub verdict: Verdict,
    pub groups: Vec<GroupReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PrecondReport {
    pub procedure: String,
    /// SMT-LIB2 term over the procedure's input names.
    pub formula: String,
    /// Per input: `[lower, upper]`, `null` for an absent bound.
    pub bounds: BTreeMap<String, (Option<i64>, Option<i64>)>,
    pub certified: bool,
    pub candidates: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub program: String,
    pub digest: String,
    pub mode: Mode,
    pub config: ConfigEcho,
    pub verdict: Verdict,
    pub procedures: BTreeMap<String, Verdict>,
    /// The attempt whose result is reported.
    pub decided_by: String,
    pub attempts: Vec<AttemptReport>,
    /// Solved predicates of the reported attempt as SMT-LIB2 terms over their argument roles.
    pub predicates: BTreeMap<String, String>,
    pub cegis_iters: usize,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub preconditions: BTreeMap<String, PrecondReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<u64>,
    /// Constraint system of the reported attempt.
    #[serde(skip)]
    pub system: Option<ConstraintSystem>,
    #[serde(skip)]
    pub solution: Solution,
    /// Fixpoint iterates of each block of the reported attempt, by first group index.
    #[serde(skip)]
    pub gfp_traces: BTreeMap<usize, Vec<Solution>>,
}

/// SHA-256 of the canonical program text.
pub fn program_digest(prog: &Program) -> String {
    hex::encode(Sha256::digest(program_to_string(prog).as_bytes()))
}

/// `pred` as an SMT-LIB2 term over its role names.
pub fn predicate_term(sym: &Sym, l: &Lambda) -> String {
    let map = l.params.iter().zip(&sym.roles).map(|(p, r)| (p.clone(), Var::new(r))).collect();
    smt::term(&l.body.rename(&map))
}

/// One scheduled solve of one program.
#[derive(Clone, Debug)]
pub struct Attempt {
    pub label: String,
    pub system: Option<ConstraintSystem>,
    pub graph: DepGraph,
    pub schedule: Option<Schedule>,
    pub outcomes: Vec<Option<GroupOutcome>>,
    pub solution: Solution,
    pub verdict: Verdict,
    pub failed_group: Option<usize>,
    pub diagnostic: Option<String>,
}

/// The constraint system `mode` solves: split at every call for decomposed modes.
pub fn system_for(prog: &Program, mode: Mode) -> Result<ConstraintSystem, String> {
    let sys = build_constraints(prog).map_err(|e| e.to_string())?;
    match mode {
        Mode::Monolithic => Ok(sys),
        _ => sys.split_all().map_err(|e| e.to_string()),
    }
}

pub fn default_schedule(sys: &ConstraintSystem, g: &DepGraph, cfg: &PipelineConfig) -> Schedule {
    let weight = |s: &Sym| Template::for_system(s, sys, &cfg.template).params.len();
    schedule_weighted(g, cfg.capacity, cfg.mode, &weight)
}

/// Units run together: a plain group or a whole fixpoint block.
fn units(s: &Schedule) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut blocks: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, g) in s.groups.iter().enumerate() {
        match g.fixpoint {
            Fixpoint::Gfp { block } => match blocks.get(&block) {
                Some(&u) => out[u].push(i),
                None => {
                    blocks.insert(block, out.len());
                    out.push(vec![i]);
                }
            },
            Fixpoint::None => out.push(vec![i]),
        }
    }
    out
}

/// Units grouped into waves with no dependency path inside a wave.
fn waves(s: &Schedule, g: &DepGraph, units: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let unit_of: BTreeMap<usize, usize> =
        units.iter().enumerate().flat_map(|(u, gs)| gs.iter().map(move |&i| (i, u))).collect();
    let mut level = vec![0usize; units.len()];
    for (u, gs) in units.iter().enumerate() {
        let deps: BTreeSet<usize> =
            gs.iter().flat_map(|&i| s.predecessors(g, i)).map(|i| unit_of[&i]).filter(|&d| d != u).collect();
        level[u] = deps.iter().map(|&d| level[d] + 1).max().unwrap_or(0);
    }
    let depth = level.iter().copied().max().map_or(0, |m| m + 1);
    (0..depth).map(|l| (0..units.len()).filter(|&u| level[u] == l).collect()).collect()
}

fn run_unit(
    sys: &ConstraintSystem,
    s: &Schedule,
    unit: &[usize],
    solved: &Solution,
    settings: &SolveSettings,
    factory: &dyn BackendFactory,
) -> GroupOutcome {
    let first = &s.groups[unit[0]];
    match first.fixpoint {
        Fixpoint::Gfp { .. } => {
            let block: Vec<Sym> = unit.iter().flat_map(|&i| s.groups[i].predicates.clone()).collect();
            gfp_iterate(sys, &block, solved, settings, factory)
        }
        Fixpoint::None => solve_group(sys, &first.predicates, first.objective, solved, settings, factory),
    }
}

/// Solves `prog` under `schedule` (or the mode's default schedule) and verifies the result.
pub fn attempt(
    prog: &Program,
    cfg: &PipelineConfig,
    factory: &dyn BackendFactory,
    label: &str,
    schedule: Option<Schedule>,
) -> Attempt {
    let mut a = Attempt {
        label: label.to_string(),
        system: None,
        graph: DepGraph::default(),
        schedule: None,
        outcomes: Vec::new(),
        solution: Solution::new(),
        verdict: Verdict::Unknown,
        failed_group: None,
        diagnostic: None,
    };
    match system_for(prog, cfg.mode) {
        Ok(sys) => attempt_on(sys, cfg, factory, label, schedule),
        Err(e) => {
            a.diagnostic = Some(e);
            a
        }
    }
}

/// As [`attempt`] on an already encoded system.
pub fn attempt_on(
    sys: ConstraintSystem,
    cfg: &PipelineConfig,
    factory: &dyn BackendFactory,
    label: &str,
    schedule: Option<Schedule>,
) -> Attempt {
    let mut a = Attempt {
        label: label.to_string(),
        system: None,
        graph: DepGraph::default(),
        schedule: None,
        outcomes: Vec::new(),
        solution: Solution::new(),
        verdict: Verdict::Unknown,
        failed_group: None,
        diagnostic: None,
    };
    let g = build_dep_graph(&sys);
    let s = schedule.unwrap_or_else(|| default_schedule(&sys, &g, cfg));
    let settings = cfg.settings();
    let us = units(&s);
    a.outcomes = vec![None; s.groups.len()];
    'waves: for wave in waves(&s, &g, &us) {
        let solved = a.solution.clone();
        let results: Vec<(usize, GroupOutcome)> =
            wave.par_iter().map(|&u| (u, run_unit(&sys, &s, &us[u], &solved, &settings, factory))).collect();
        let mut failed = false;
        for (u, out) in results {
            if out.solved {
                a.solution.extend(out.solutions.clone());
            } else if !failed {
                failed = true;
                a.failed_group = Some(us[u][0]);
                a.diagnostic = out.diagnostic.clone();
            }
            // Block totals and the iterate trace stay on the block's first group.
            for (n, &i) in us[u].iter().enumerate() {
                let mut o = out.clone();
                if n > 0 {
                    o.cegis_iters = 0;
                    o.counterexamples = 0;
                    o.trace.clear();
                }
                a.outcomes[i] = Some(o);
            }
        }
        if failed {
            break 'waves;
        }
    }
    if a.failed_group.is_none() {
        match verify_solution(&sys.clauses, &Interpretation::new(), &a.solution, factory) {
            Ok(Verification::Certificate) => a.verdict = Verdict::Terminating,
            Ok(Verification::Counterexample { clause, .. }) => {
                a.diagnostic =
                    Some(format!("final check failed on clause {clause} ({:?})", sys.clauses[clause].origin));
            }
            Err(e) => a.diagnostic = Some(e.to_string()),
        }
    }
    a.system = Some(sys);
    a.graph = g;
    a.schedule = Some(s);
    a
}

fn group_reports(a: &Attempt, timing: bool) -> Vec<GroupReport> {
    let Some(s) = &a.schedule else { return Vec::new() };
    s.groups
        .iter()
        .enumerate()
        .map(|(i, grp)| {
            let out = a.outcomes[i].as_ref();
            let status = match out {
                None => GroupStatus::Skipped,
                Some(o) if !o.solved => GroupStatus::Failed,
                Some(o) if o.widened => GroupStatus::Widened,
                Some(_) => GroupStatus::Solved,
            };
            GroupReport {
                index: i,
                predicates: grp.predicates.iter().map(|p| p.name()).collect(),
                objective: grp.objective,
                fixpoint: grp.fixpoint,
                status,
                rounds: out.map_or(0, |o| o.rounds),
                cegis_iters: out.map_or(0, |o| o.cegis_iters),
                counterexamples: out.map_or(0, |o| o.counterexamples),
                wall_ms: out.filter(|_| timing).map(|o| o.wall_ms),
                diagnostic: out.and_then(|o| o.diagnostic.clone()),
            }
        })
        .collect()
}

/// Per-procedure verdicts: a procedure is certified when all its clauses
/// have solved symbols and hold.
fn procedure_verdicts(a: &Attempt, factory: &dyn BackendFactory) -> BTreeMap<String, Verdict> {
    let Some(sys) = &a.system else { return BTreeMap::new() };
    sys.procedures
        .iter()
        .map(|p| {
            if a.verdict == Verdict::Terminating {
                return (p.clone(), Verdict::Terminating);
            }
            let clauses: Vec<_> = sys.clauses.iter().filter(|c| &c.origin.procedure == p).cloned().collect();
            let covered =
                clauses.iter().all(|c| c.premises().iter().chain(&c.conclusions()).all(|s| a.solution.contains_key(s)));
            let ok = covered
                && matches!(
                    verify_solution(&clauses, &Interpretation::new(), &a.solution, factory),
                    Ok(Verification::Certificate)
                );
            (p.clone(), if ok { Verdict::Terminating } else { Verdict::Unknown })
        })
        .collect()
}

/// Full analysis with the refinement ladder: re-composition of the failing
/// group, then loop unrolling, then inlining of the entry's calls.
pub fn run_pipeline(prog: &Program, cfg: &PipelineConfig, factory: &dyn BackendFactory) -> AnalysisReport {
    let start = Instant::now();
    let mut attempts = vec![attempt(prog, cfg, factory, "base", None)];
    if cfg.refine && attempts[0].verdict == Verdict::Unknown {
        let base = &attempts[0];
        if let (Some(j), Some(s), Mode::Procedural | Mode::SccMin) = (base.failed_group, &base.schedule, cfg.mode) {
            let merged = s.merged_with_predecessors(&base.graph, j);
            attempts.push(attempt(prog, cfg, factory, "re-composition", Some(merged)));
        }
        let mut expansions: Vec<(String, Program)> = Vec::new();
        for k in 1..=cfg.max_unroll {
            expansions.push((format!("unroll {k}"), unroll_loops(prog, k)));
        }
        for d in 1..=cfg.max_inline {
            expansions.push((format!("inline {d}"), inline_calls(prog, d)));
        }
        for (label, p) in expansions {
            if attempts.last().is_some_and(|a| a.verdict == Verdict::Terminating) {
                break;
            }
            if p == *prog {
                continue;
            }
            attempts.push(attempt(&p, cfg, factory, &label, None));
        }
    }
    let chosen = attempts.iter().position(|a| a.verdict == Verdict::Terminating).unwrap_or(0);
    let a = &attempts[chosen];
    let predicates = a.solution.iter().map(|(s, p)| (s.name(), predicate_term(s, &p.formula))).collect();
    let gfp_traces = a
        .outcomes
        .iter()
        .enumerate()
        .filter_map(|(i, o)| o.as_ref().filter(|o| !o.trace.is_empty()).map(|o| (i, o.trace.clone())))
        .collect();
    AnalysisReport {
        program: prog.entry.clone(),
        digest: program_digest(prog),
        mode: cfg.mode,
        config: ConfigEcho {
            mode: cfg.mode,
            capacity: cfg.capacity,
            template: cfg.template,
            budget_iters: cfg.budget.iters,
            budget_secs: cfg.budget.time.as_secs(),
            seed: cfg.budget.seed,
            gfp_max_iters: cfg.gfp_max_iters,
            refine: cfg.refine,
            max_unroll: cfg.max_unroll,
            max_inline: cfg.max_inline,
            backend: factory.describe(),
        },
        verdict: a.verdict,
        procedures: procedure_verdicts(a, factory),
        decided_by: a.label.clone(),
        attempts: attempts
            .iter()
            .map(|x| AttemptReport {
                label: x.label.clone(),
                verdict: x.verdict,
                groups: group_reports(x, cfg.timing),
                diagnostic: x.diagnostic.clone(),
            })
            .collect(),
        predicates,
        cegis_iters: attempts.iter().flat_map(|x| x.outcomes.iter().flatten()).map(|o| o.cegis_iters).sum(),
        preconditions: BTreeMap::new(),
        wall_ms: cfg.timing.then(|| start.elapsed().as_millis() as u64),
        system: a.system.clone(),
        solution: a.solution.clone(),
        gfp_traces,
    }
}
