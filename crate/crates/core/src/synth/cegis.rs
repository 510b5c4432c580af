use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::Serialize;

use super::backend::{BackendError, BackendFactory, CheckResult, Pref, SolverBackend};
use super::template::Template;
use super::SynthError;
use crate::encode::Clause;
use crate::logic::{evaluate, expand_apps, Sym, Var};
use crate::{Formula, Int, Interpretation, Lambda, LinExpr, Valuation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Objective {
    Any,
    Weakest,
    Strongest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    pub iters: usize,
    pub time: Duration,
    /// Shifts the order of counterexample hints.
    pub seed: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { iters: 200, time: Duration::from_secs(30), seed: 0 }
    }
}

/// Clauses to satisfy by choosing template parameters for `unknowns`, with
/// every other applied symbol given by `fixed`.
#[derive(Clone, Debug)]
pub struct Subproblem {
    pub clauses: Vec<Clause>,
    pub unknowns: Vec<Template>,
    pub fixed: Interpretation,
    pub objective: Objective,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Status {
    Solved,
    Bottom,
    Top,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredicateSolution {
    pub symbol: Sym,
    pub formula: Lambda,
    /// Template parameters; absent for solutions not produced from a template.
    pub params: Option<Valuation>,
    pub status: Status,
}

impl PredicateSolution {
    pub fn from_params(t: &Template, params: Valuation) -> Result<Self, SynthError> {
        let formula = t.instantiate(&params)?;
        let status = if formula.body.is_true() {
            Status::Top
        } else if formula.body.is_false() {
            Status::Bottom
        } else {
            Status::Solved
        };
        Ok(PredicateSolution { symbol: t.symbol.clone(), formula, params: Some(params), status })
    }

    /// A predicate given directly as a formula, outside any template.
    pub fn from_formula(symbol: Sym, formula: Lambda) -> Self {
        let status = if formula.body.is_true() {
            Status::Top
        } else if formula.body.is_false() {
            Status::Bottom
        } else {
            Status::Solved
        };
        PredicateSolution { symbol, formula, params: None, status }
    }

    pub fn top(symbol: Sym) -> Self {
        let arity = symbol.arity;
        PredicateSolution { symbol, formula: Lambda::constant(arity, true), params: None, status: Status::Top }
    }

    pub fn is_valid(&self) -> bool {
        self.status != Status::Failed
    }
}

pub type Solution = BTreeMap<Sym, PredicateSolution>;

#[derive(Clone, Debug)]
pub struct CegisOutcome {
    pub solved: bool,
    pub solutions: Solution,
    pub iterations: usize,
    pub counterexamples: usize,
    /// Successive accepted parameter vectors; the last one is returned.
    pub trace: Vec<BTreeMap<Sym, Valuation>>,
    pub diagnostic: Option<String>,
}

/// Outcome of checking a full solution against clauses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verification {
    Certificate,
    Counterexample { clause: usize, valuation: Valuation },
}

fn solution_interp(fixed: &Interpretation, sol: &Solution) -> Interpretation {
    let mut interp = fixed.clone();
    for (s, p) in sol {
        interp.insert(s.clone(), p.formula.clone());
    }
    interp
}

/// Searches for a valuation of `clause`'s universals that falsifies it.
fn falsify(
    backend: &mut dyn SolverBackend,
    clause: &Clause,
    interp: &Interpretation,
    pref: Option<Pref>,
) -> Result<Option<Valuation>, SynthError> {
    let f = expand_apps(&clause.formula(), interp);
    if !f.symbols().is_empty() {
        let names: Vec<String> = f.symbols().iter().map(|s| s.name()).collect();
        return Err(SynthError::Unfixed(names.join(", ")));
    }
    let vars = clause.vars();
    backend.push();
    for v in &vars {
        backend.declare(v, None);
        if let Some(p) = pref {
            backend.prefer(v, p);
        }
    }
    let asserted = backend.assert(&Formula::not(f));
    let result = asserted.and_then(|_| backend.check());
    backend.pop();
    match result? {
        CheckResult::Unsat => Ok(None),
        CheckResult::Sat(m) => Ok(Some(
            vars.into_iter()
                .map(|v| {
                    let x = m.get(&v).cloned().unwrap_or_default();
                    (v, x)
                })
                .collect(),
        )),
    }
}

/// Checks every clause under `sol` (plus `fixed`).
pub fn verify_solution(
    clauses: &[Clause],
    fixed: &Interpretation,
    sol: &Solution,
    factory: &dyn BackendFactory,
) -> Result<Verification, SynthError> {
    for (s, p) in sol {
        if s.kind.is_ranking() && p.params.is_none() {
            return Err(SynthError::ShapeViolation(s.name()));
        }
    }
    let interp = solution_interp(fixed, sol);
    let mut backend = factory.create()?;
    for (i, c) in clauses.iter().enumerate() {
        if let Some(valuation) = falsify(backend.as_mut(), c, &interp, None)? {
            return Ok(Verification::Counterexample { clause: i, valuation });
        }
    }
    Ok(Verification::Certificate)
}

/// The clause at a concrete valuation, as a constraint over template parameters.
pub fn ground_constraint(
    clause: &Clause,
    cex: &Valuation,
    templates: &BTreeMap<Sym, &Template>,
    fixed: &Interpretation,
) -> Result<Formula, SynthError> {
    let consts: BTreeMap<Var, LinExpr> = clause
        .vars()
        .into_iter()
        .map(|v| {
            let x = cex.get(&v).cloned().unwrap_or_default();
            (v, LinExpr::constant(x))
        })
        .collect();
    let ground = clause.formula().substitute(&consts);
    let mut err = None;
    let none = Interpretation::new();
    let f = ground.replace_apps(&mut |app| {
        let args: Vec<Int> = app.args.iter().map(|a| a.constant_part().clone()).collect();
        if let Some(t) = templates.get(&app.symbol) {
            Some(t.at_point(&args))
        } else if let Some(lam) = fixed.get(&app.symbol) {
            let inst = lam.apply(&app.args);
            match evaluate(&inst, &Valuation::new(), &none) {
                Ok(b) => Some(Formula::bool(b)),
                Err(e) => {
                    err = Some(SynthError::Eval(e.to_string()));
                    None
                }
            }
        } else {
            err = Some(SynthError::Unfixed(app.symbol.name()));
            None
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(f.simplify()),
    }
}

struct Run<'a> {
    sp: &'a Subproblem,
    templates: BTreeMap<Sym, &'a Template>,
    synth: Box<dyn SolverBackend>,
    verify: Box<dyn SolverBackend>,
    improving: bool,
}

impl<'a> Run<'a> {
    fn params_of(&self, model: &Valuation) -> BTreeMap<Sym, Valuation> {
        self.sp
            .unknowns
            .iter()
            .map(|t| {
                let v = t
                    .params
                    .iter()
                    .map(|p| (p.var.clone(), model.get(&p.var).cloned().unwrap_or_else(|| Int::from(p.lo))))
                    .collect();
                (t.symbol.clone(), v)
            })
            .collect()
    }

    fn improvement(&self, best: &BTreeMap<Sym, Valuation>) -> Option<Formula> {
        let weaker = match self.sp.objective {
            Objective::Any => return None,
            Objective::Weakest => true,
            Objective::Strongest => false,
        };
        let deltas: Vec<LinExpr> = self.sp.unknowns.iter().flat_map(|t| t.deltas(&best[&t.symbol], weaker)).collect();
        if deltas.is_empty() {
            return None;
        }
        let mut parts: Vec<Formula> = deltas.iter().map(|d| Formula::ge(d, &LinExpr::zero())).collect();
        let total = deltas.iter().fold(LinExpr::zero(), |acc, d| acc.plus(d));
        parts.push(Formula::ge(&total, &LinExpr::int(1)));
        Some(Formula::and(parts))
    }

    fn learn(&mut self, g: &Formula, best: Option<&BTreeMap<Sym, Valuation>>) -> Result<(), BackendError> {
        if self.improving {
            self.synth.pop();
        }
        self.synth.assert(g)?;
        if self.improving {
            self.synth.push();
            let imp = self.improvement(best.expect("improving from a solution")).expect("optimizable");
            self.synth.assert(&imp)?;
        }
        Ok(())
    }
}

/// Counterexample-guided search for template parameters.
pub fn cegis_solve(sp: &Subproblem, factory: &dyn BackendFactory, budget: &Budget) -> CegisOutcome {
    let mut out = CegisOutcome {
        solved: false,
        solutions: Solution::new(),
        iterations: 0,
        counterexamples: 0,
        trace: Vec::new(),
        diagnostic: None,
    };
    let (synth, verify) = match (factory.create(), factory.create()) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => {
            out.diagnostic = Some(e.to_string());
            fail_all(sp, &mut out);
            return out;
        }
    };
    let templates = sp.unknowns.iter().map(|t| (t.symbol.clone(), t)).collect();
    let mut run = Run { sp, templates, synth, verify, improving: false };
    for t in &sp.unknowns {
        let prefs = if sp.objective == Objective::Strongest { t.strongest_preference() } else { t.preferred() };
        for (p, (_, pref)) in t.params.iter().zip(prefs) {
            run.synth.declare(&p.var, Some((p.lo, p.hi)));
            run.synth.prefer(&p.var, Pref::Toward(pref));
        }
    }
    let start = Instant::now();
    let mut best: Option<BTreeMap<Sym, Valuation>> = None;
    let result: Result<(), SynthError> = (|| {
        while out.iterations < budget.iters && start.elapsed() < budget.time {
            out.iterations += 1;
            let model = match run.synth.check()? {
                CheckResult::Unsat => break,
                CheckResult::Sat(m) => m,
            };
            let cand = run.params_of(&model);
            let mut sol = Solution::new();
            for t in &sp.unknowns {
                sol.insert(t.symbol.clone(), PredicateSolution::from_params(t, cand[&t.symbol].clone())?);
            }
            let interp = solution_interp(&sp.fixed, &sol);
            let pref = verification_preference(out.iterations + (budget.seed % 3) as usize, run.verify.is_complete());
            let mut found = None;
            for c in &sp.clauses {
                if let Some(cex) = falsify(run.verify.as_mut(), c, &interp, pref)? {
                    found = Some((c, cex));
                    break;
                }
            }
            match found {
                Some((c, cex)) => {
                    out.counterexamples += 1;
                    let g = ground_constraint(c, &cex, &run.templates, &sp.fixed)?;
                    run.learn(&g, best.as_ref())?;
                }
                None => {
                    let canon: BTreeMap<Sym, Valuation> =
                        sp.unknowns.iter().map(|t| (t.symbol.clone(), t.canonicalize(&cand[&t.symbol]))).collect();
                    out.trace.push(canon.clone());
                    let imp = run.improvement(&canon);
                    best = Some(canon);
                    let Some(imp) = imp else { break };
                    if run.improving {
                        run.synth.pop();
                    }
                    run.synth.push();
                    run.improving = true;
                    run.synth.assert(&imp)?;
                }
            }
        }
        Ok(())
    })();
    if let Err(e) = result {
        out.diagnostic = Some(e.to_string());
    }
    match best {
        Some(b) => {
            out.solved = true;
            for t in &sp.unknowns {
                let p = PredicateSolution::from_params(t, b[&t.symbol].clone()).expect("complete parameters");
                out.solutions.insert(t.symbol.clone(), p);
            }
        }
        None => {
            if out.diagnostic.is_none() {
                out.diagnostic = Some(if out.iterations >= budget.iters || start.elapsed() >= budget.time {
                    "budget exhausted".to_string()
                } else {
                    "no template instance satisfies the clauses".to_string()
                });
            }
            fail_all(sp, &mut out);
        }
    }
    out
}

/// Alternates counterexample value hints between zero and the box extremes.
fn verification_preference(iteration: usize, complete: bool) -> Option<Pref> {
    if complete {
        return None;
    }
    Some(match iteration % 3 {
        0 => Pref::Toward(i64::MIN),
        1 => Pref::Zero,
        _ => Pref::Toward(i64::MAX),
    })
}

fn fail_all(sp: &Subproblem, out: &mut CegisOutcome) {
    for t in &sp.unknowns {
        out.solutions.insert(
            t.symbol.clone(),
            PredicateSolution {
                symbol: t.symbol.clone(),
                formula: Lambda::constant(t.symbol.arity, true),
                params: None,
                status: Status::Failed,
            },
        );
    }
}
