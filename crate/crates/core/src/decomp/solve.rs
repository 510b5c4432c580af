//! Solving scheduled groups, including greatest-fixpoint blocks.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use crate::encode::{Clause, ConstraintSystem};
use crate::logic::{PredKind, Sym};
use crate::synth::{
    cegis_solve, BackendFactory, Budget, Objective, PredicateSolution, Solution, Subproblem, Template, TemplateConfig,
};
use crate::{Formula, Interpretation};

/// Settings shared by every group solve.
#[derive(Clone, Copy, Debug)]
pub struct SolveSettings {
    pub template: TemplateConfig,
    pub budget: Budget,
    pub gfp_max_iters: usize,
}

impl Default for SolveSettings {
    fn default() -> Self {
        SolveSettings { template: TemplateConfig::default(), budget: Budget::default(), gfp_max_iters: 10 }
    }
}

/// Result of solving one group or one fixpoint block.
#[derive(Clone, Debug)]
pub struct GroupOutcome {
    pub solved: bool,
    pub solutions: Solution,
    /// CEGIS iterations summed over all synthesis calls.
    pub cegis_iters: usize,
    pub counterexamples: usize,
    /// Fixpoint rounds (0 for plain groups).
    pub rounds: usize,
    /// The fixpoint block hit its round limit before stabilizing.
    pub widened: bool,
    /// Fixpoint iterates, starting with the all-top interpretation.
    pub trace: Vec<Solution>,
    pub diagnostic: Option<String>,
    pub wall_ms: u64,
}

pub fn interpretation(sol: &Solution) -> Interpretation {
    sol.iter().map(|(s, p)| (s.clone(), p.formula.clone())).collect()
}

/// Clauses concluding one of `unknowns`, with applications of symbols that
/// are neither unknown nor known replaced by `true`.
pub fn group_clauses(sys: &ConstraintSystem, unknowns: &BTreeSet<Sym>, known: &BTreeSet<Sym>) -> Vec<Clause> {
    let keep = |f: &Formula| {
        f.replace_apps(&mut |app| {
            (!unknowns.contains(&app.symbol) && !known.contains(&app.symbol)).then_some(Formula::True)
        })
        .simplify()
    };
    sys.clauses
        .iter()
        .filter(|c| c.conclusions().iter().any(|s| unknowns.contains(s)))
        .map(|c| Clause { body: keep(&c.body), head: keep(&c.head), origin: c.origin.clone() })
        .collect()
}

/// The synthesis query for `preds` with everything in `solved` fixed.
pub fn group_subproblem(
    sys: &ConstraintSystem,
    preds: &[Sym],
    objective: Objective,
    solved: &Solution,
    template: &TemplateConfig,
) -> Subproblem {
    let unknowns: BTreeSet<Sym> = preds.iter().cloned().collect();
    let known: BTreeSet<Sym> = solved.keys().cloned().collect();
    Subproblem {
        clauses: group_clauses(sys, &unknowns, &known),
        unknowns: preds.iter().map(|s| Template::for_system(s, sys, template)).collect(),
        fixed: interpretation(solved),
        objective,
    }
}

/// Solves `preds` jointly with everything in `solved` fixed.
pub fn solve_group(
    sys: &ConstraintSystem,
    preds: &[Sym],
    objective: Objective,
    solved: &Solution,
    settings: &SolveSettings,
    factory: &dyn BackendFactory,
) -> GroupOutcome {
    let start = Instant::now();
    let sp = group_subproblem(sys, preds, objective, solved, &settings.template);
    let out = cegis_solve(&sp, factory, &settings.budget);
    GroupOutcome {
        solved: out.solved,
        solutions: out.solutions,
        cegis_iters: out.iterations,
        counterexamples: out.counterexamples,
        rounds: 0,
        widened: false,
        trace: Vec::new(),
        diagnostic: out.diagnostic,
        wall_ms: start.elapsed().as_millis() as u64,
    }
}

/// Greatest-fixpoint iteration over a cyclic block: every predicate starts
/// at top and is re-solved for its strongest instance with the others, and
/// its own recursive occurrences, fixed at the current iterate.
pub fn gfp_iterate(
    sys: &ConstraintSystem,
    block: &[Sym],
    solved: &Solution,
    settings: &SolveSettings,
    factory: &dyn BackendFactory,
) -> GroupOutcome {
    let start = Instant::now();
    let mut out = GroupOutcome {
        solved: false,
        solutions: Solution::new(),
        cegis_iters: 0,
        counterexamples: 0,
        rounds: 0,
        widened: false,
        trace: Vec::new(),
        diagnostic: None,
        wall_ms: 0,
    };
    let templates: BTreeMap<Sym, Template> =
        block.iter().map(|s| (s.clone(), Template::for_system(s, sys, &settings.template))).collect();
    let mut current = Solution::new();
    for (s, t) in &templates {
        let Some(top) = t.top() else {
            out.diagnostic = Some(format!("`{}` has no top element", s.name()));
            out.wall_ms = start.elapsed().as_millis() as u64;
            return out;
        };
        current.insert(s.clone(), PredicateSolution::from_params(t, top).expect("complete parameters"));
    }
    out.trace.push(current.clone());
    let mut stable = false;
    while out.rounds < settings.gfp_max_iters {
        out.rounds += 1;
        let mut changed = false;
        for p in block {
            let t = &templates[p];
            let mut known = solved.clone();
            known.extend(current.iter().filter(|(s, _)| *s != p).map(|(s, v)| (s.clone(), v.clone())));
            let unknowns = BTreeSet::from([p.clone()]);
            let known_syms: BTreeSet<Sym> = known.keys().cloned().collect();
            let own = current[p].formula.clone();
            let clauses = group_clauses(sys, &unknowns, &known_syms)
                .into_iter()
                .map(|c| {
                    let body = c.body.replace_apps(&mut |app| {
                        (app.symbol == *p && p.kind != PredKind::Inv).then(|| own.apply(&app.args))
                    });
                    Clause { body, ..c }
                })
                .collect();
            let sp = Subproblem {
                clauses,
                unknowns: vec![t.clone()],
                fixed: interpretation(&known),
                objective: Objective::Strongest,
            };
            let r = cegis_solve(&sp, factory, &settings.budget);
            out.cegis_iters += r.iterations;
            out.counterexamples += r.counterexamples;
            if !r.solved {
                out.diagnostic = r.diagnostic.map(|d| format!("{}: {d}", p.name()));
                out.solutions = r.solutions;
                out.wall_ms = start.elapsed().as_millis() as u64;
                return out;
            }
            let fresh = r.solutions[p].params.clone().expect("template solution");
            let prev = current[p].params.clone().expect("template solution");
            let next = t.meet(&fresh, &prev).unwrap_or(fresh);
            if next != prev {
                changed = true;
                current.insert(p.clone(), PredicateSolution::from_params(t, next).expect("complete parameters"));
            }
        }
        out.trace.push(current.clone());
        if !changed {
            stable = true;
            break;
        }
    }
    out.widened = !stable;
    out.solved = true;
    out.solutions = current;
    out.wall_ms = start.elapsed().as_millis() as u64;
    out
}
