//! Second-order constraint systems for termination.
//!
//! Each reachable procedure contributes three clauses: initiation of its
//! invariant, consecution together with a ranking relation, and exit into
//! its summary. Splitting a callee replaces its summary by a context-relative
//! `Sum` and adds one calling-context clause per call site.

mod chc;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::ir::{self, Iots, IrError, Program, Segment};
use crate::logic::{PredKind, PredicateSymbol, SiteRef, Sym, Var};
use crate::{Formula, LinExpr};

pub use chc::to_smtlib;

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error(transparent)]
    Ir(#[from] IrError),
    #[error("unknown procedure `{0}`")]
    UnknownProcedure(String),
    #[error("procedure `{caller}` has no call site {index}")]
    UnknownSite { caller: String, index: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub enum Schema {
    /// `Init ⇒ Inv`
    Initiation,
    /// `Inv ∧ Trans ⇒ Inv' ∧ RR`
    Consecution,
    /// `Init ∧ Inv' ∧ Out ⇒ Summary`
    Exit,
    /// Reachable states at a call site imply the callee's context.
    CallContext(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct Origin {
    pub procedure: String,
    pub schema: Schema,
}

/// `∀ vars. body ⇒ head`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clause {
    pub body: Formula,
    pub head: Formula,
    pub origin: Origin,
}

impl Clause {
    pub fn formula(&self) -> Formula {
        Formula::implies(self.body.clone(), self.head.clone())
    }

    pub fn premises(&self) -> BTreeSet<Sym> {
        self.body.symbols()
    }

    pub fn conclusions(&self) -> BTreeSet<Sym> {
        self.head.symbols()
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut v = self.body.free_vars();
        v.extend(self.head.free_vars());
        v
    }
}

pub fn inv_symbol(t: &Iots) -> Sym {
    PredicateSymbol::new(PredKind::Inv, t.procedure.clone(), names(&t.state_vars)).into_sym()
}

pub fn rr_symbol(t: &Iots) -> Sym {
    let roles = names(&t.state_vars).into_iter().chain(names(&t.primed_state())).collect();
    PredicateSymbol::new(PredKind::RR, t.procedure.clone(), roles).into_sym()
}

pub fn sum_symbol(p: &ir::Procedure) -> Sym {
    PredicateSymbol::new(PredKind::Sum, p.name.clone(), ir::io_roles(p)).into_sym()
}

pub fn callctx_symbol(callee: &ir::Procedure, caller: &str, site: usize) -> Sym {
    let roles = callee.params.iter().map(|x| format!("in:{x}")).collect();
    PredicateSymbol::new(PredKind::CallCtx, callee.name.clone(), roles).at_site(caller, site).into_sym()
}

pub fn recrank_symbol(owner: &str, width: usize) -> Sym {
    let roles = (0..width).map(|i| format!("from:{i}")).chain((0..width).map(|i| format!("to:{i}"))).collect();
    PredicateSymbol::new(PredKind::RecRank, owner, roles).into_sym()
}

fn names(vs: &[Var]) -> Vec<String> {
    vs.iter().map(|v| v.name().to_string()).collect()
}

fn vars_expr(vs: &[Var]) -> Vec<LinExpr> {
    vs.iter().map(|v| LinExpr::var(v.clone())).collect()
}

fn padded(vs: &[Var], width: usize) -> Vec<LinExpr> {
    let mut out = vars_expr(vs);
    out.resize(width, LinExpr::zero());
    out
}

/// All clauses for one program, plus the lowering they were built from.
#[derive(Clone, Debug)]
pub struct ConstraintSystem {
    pub program: Program,
    pub entry: String,
    /// Procedures reachable from the entry, in source order.
    pub procedures: Vec<String>,
    pub iots: BTreeMap<String, Iots>,
    /// Callees whose summaries are split into context and context-relative summary.
    pub split: BTreeSet<String>,
    /// Assumption on the entry inputs, over `x!in` variables.
    pub entry_assumption: Formula,
    /// Recursive components: procedure to the name of its `RecRank` owner.
    pub recursion: BTreeMap<String, String>,
    /// Argument width of `RecRank` symbols.
    pub rec_width: usize,
    pub clauses: Vec<Clause>,
}

impl ConstraintSystem {
    pub fn iots(&self, name: &str) -> &Iots {
        &self.iots[name]
    }

    pub fn procedure(&self, name: &str) -> &ir::Procedure {
        self.program.procedure(name).expect("procedure of the system")
    }

    /// Every unknown occurring in some clause.
    pub fn symbols(&self) -> BTreeSet<Sym> {
        self.clauses.iter().flat_map(|c| c.premises().into_iter().chain(c.conclusions())).collect()
    }

    pub fn clauses_concluding<'a>(&'a self, sym: &'a Sym) -> impl Iterator<Item = &'a Clause> + 'a {
        self.clauses.iter().filter(move |c| c.conclusions().contains(sym))
    }

    /// Reachable call sites `(caller, site)` whose callee is `callee`.
    pub fn sites_of(&self, callee: &str) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        for c in &self.procedures {
            for s in &self.procedure(c).call_sites {
                if s.callee == callee {
                    out.push((c.clone(), s.id));
                }
            }
        }
        out
    }

    /// The summary symbol callers use for `callee`: `Sum` when split, `Summary` otherwise.
    pub fn summary_of(&self, callee: &str) -> Sym {
        let p = self.procedure(callee);
        if self.split.contains(callee) {
            sum_symbol(p)
        } else {
            ir::summary_symbol(p)
        }
    }

    /// Splits the summary of the callee at `site`; every call of that callee is affected.
    pub fn split_summary(&self, site: &SiteRef) -> Result<ConstraintSystem, EncodeError> {
        let caller =
            self.program.procedure(&site.caller).ok_or_else(|| EncodeError::UnknownProcedure(site.caller.clone()))?;
        let s = caller
            .site(site.index)
            .ok_or_else(|| EncodeError::UnknownSite { caller: site.caller.clone(), index: site.index })?;
        self.split_callee(&s.callee)
    }

    pub fn split_callee(&self, callee: &str) -> Result<ConstraintSystem, EncodeError> {
        let mut split = self.split.clone();
        split.insert(callee.to_string());
        build_with(&self.program, &self.entry, split, self.entry_assumption.clone())
    }

    /// Splits every callee that has a reachable call site.
    pub fn split_all(&self) -> Result<ConstraintSystem, EncodeError> {
        let callees: BTreeSet<String> = self
            .procedures
            .iter()
            .flat_map(|p| self.procedure(p).call_sites.iter().map(|s| s.callee.clone()))
            .collect();
        build_with(&self.program, &self.entry, callees, self.entry_assumption.clone())
    }

    /// Same system with `assumption` (over entry `x!in` variables) restricting entry inputs.
    pub fn assuming(&self, assumption: Formula) -> Result<ConstraintSystem, EncodeError> {
        build_with(&self.program, &self.entry, self.split.clone(), assumption)
    }
}

/// Unsplit system for the program's entry procedure.
pub fn build_constraints(prog: &Program) -> Result<ConstraintSystem, EncodeError> {
    build_with(prog, &prog.entry, BTreeSet::new(), Formula::True)
}

/// Unsplit system rooted at `entry`.
pub fn build_constraints_for(prog: &Program, entry: &str) -> Result<ConstraintSystem, EncodeError> {
    if prog.procedure(entry).is_none() {
        return Err(EncodeError::UnknownProcedure(entry.to_string()));
    }
    build_with(prog, entry, BTreeSet::new(), Formula::True)
}

fn reachable(prog: &Program, entry: &str) -> Vec<String> {
    let mut seen = BTreeSet::from([entry.to_string()]);
    let mut work = vec![entry.to_string()];
    while let Some(p) = work.pop() {
        for s in &prog.procedure(&p).expect("resolved").call_sites {
            if seen.insert(s.callee.clone()) {
                work.push(s.callee.clone());
            }
        }
    }
    prog.procedures.iter().map(|p| p.name.clone()).filter(|n| seen.contains(n)).collect()
}

fn build_with(
    prog: &Program,
    entry: &str,
    split: BTreeSet<String>,
    assumption: Formula,
) -> Result<ConstraintSystem, EncodeError> {
    let procedures = reachable(prog, entry);
    let comps = ir::recursive_components(prog);
    let mut owners: BTreeMap<usize, String> = BTreeMap::new();
    for p in &procedures {
        if let Some(c) = comps.get(p) {
            owners.entry(*c).or_insert_with(|| p.clone());
        }
    }
    let recursion: BTreeMap<String, String> =
        procedures.iter().filter_map(|p| comps.get(p).map(|c| (p.clone(), owners[c].clone()))).collect();
    let rec_width = recursion.keys().map(|p| prog.procedure(p).unwrap().params.len()).max().unwrap_or(0);
    let all = ir::lower_program(prog)?;
    let iots: BTreeMap<String, Iots> = all.into_iter().filter(|(k, _)| procedures.contains(k)).collect();
    let mut sys = ConstraintSystem {
        program: prog.clone(),
        entry: entry.to_string(),
        procedures,
        iots,
        split,
        entry_assumption: assumption,
        recursion,
        rec_width,
        clauses: Vec::new(),
    };
    let mut clauses = Vec::new();
    for p in &sys.procedures {
        clauses.extend(procedure_clauses(&sys, p));
    }
    for p in &sys.procedures {
        for s in &sys.procedure(p).call_sites {
            if sys.split.contains(&s.callee) {
                clauses.push(build_callctx_clause(&sys, p, s.id));
            }
        }
    }
    sys.clauses = clauses;
    Ok(sys)
}

/// Restriction on a procedure's inputs in clauses that mention them.
fn context(sys: &ConstraintSystem, name: &str) -> Formula {
    let t = sys.iots(name);
    let callers = sys.sites_of(name);
    let is_entry = name == sys.entry;
    if !sys.split.contains(name) {
        return if is_entry && callers.is_empty() { sys.entry_assumption.clone() } else { Formula::True };
    }
    let callee = sys.procedure(name);
    let mut options: Vec<Formula> =
        callers.iter().map(|(c, s)| Formula::app(callctx_symbol(callee, c, *s), vars_expr(&t.input_vars))).collect();
    if is_entry {
        options.push(sys.entry_assumption.clone());
    }
    Formula::or(options)
}

/// Replaces unsplit summaries of split callees by their `Sum` symbols.
fn with_split_summaries(sys: &ConstraintSystem, f: &Formula) -> Formula {
    f.replace_apps(&mut |app| {
        let s = &app.symbol;
        if s.kind == PredKind::Summary && sys.split.contains(&s.owner) {
            Some(Formula::app(sum_symbol(sys.procedure(&s.owner)), app.args.clone()))
        } else {
            None
        }
    })
}

/// Obligations that recursive calls in `seg` decrease the component's ranking.
fn recursion_obligations(sys: &ConstraintSystem, t: &Iots, seg: Segment) -> Formula {
    let Some(owner) = sys.recursion.get(&t.procedure) else { return Formula::True };
    let sym = recrank_symbol(owner, sys.rec_width);
    Formula::and(
        t.placeholders
            .iter()
            .filter(|ph| ph.segments.contains(&seg))
            .filter_map(|ph| {
                let hit = ph.hit.as_ref()?;
                let mut args = padded(&t.ghost_inputs, sys.rec_width);
                args.extend(padded(&ph.inputs, sys.rec_width));
                Some(Formula::or([
                    Formula::eq(&LinExpr::var(hit.clone()), &LinExpr::zero()),
                    Formula::app(sym.clone(), args),
                ]))
            })
            .collect::<Vec<_>>(),
    )
}

/// Renaming that moves the exit segment onto primed state and primed intermediates.
fn exit_renaming(t: &Iots) -> BTreeMap<Var, Var> {
    let keep: BTreeSet<&Var> = t.output_vars.iter().collect();
    t.out
        .free_vars()
        .into_iter()
        .chain(t.placeholders.iter().flat_map(|ph| ph.inputs.iter().chain(&ph.outputs).chain(&ph.hit).cloned()))
        .chain(t.state_vars.iter().cloned())
        .filter(|v| !keep.contains(v))
        .map(|v| (v.clone(), v.primed()))
        .collect()
}

fn procedure_clauses(sys: &ConstraintSystem, name: &str) -> Vec<Clause> {
    let t = sys.iots(name);
    let ctx = context(sys, name);
    let inv = inv_symbol(t);
    let inv_x = Formula::app(inv.clone(), vars_expr(&t.state_vars));
    let inv_xp = Formula::app(inv, vars_expr(&t.primed_state()));
    let rr =
        Formula::app(rr_symbol(t), vars_expr(&t.state_vars).into_iter().chain(vars_expr(&t.primed_state())).collect());
    let summary = Formula::app(
        sys.summary_of(name),
        vars_expr(&t.input_vars).into_iter().chain(vars_expr(&t.output_vars)).collect(),
    );
    let init = with_split_summaries(sys, &t.init);
    let trans = with_split_summaries(sys, &t.trans);
    let ren = exit_renaming(t);
    let out = with_split_summaries(sys, &t.out).rename(&ren);
    let origin = |schema| Origin { procedure: name.to_string(), schema };
    vec![
        Clause {
            body: Formula::and([ctx.clone(), init.clone()]),
            head: Formula::and([inv_x.clone(), recursion_obligations(sys, t, Segment::Init)]),
            origin: origin(Schema::Initiation),
        },
        Clause {
            body: Formula::and([inv_x, trans]),
            head: Formula::and([inv_xp.clone(), rr, recursion_obligations(sys, t, Segment::Trans)]),
            origin: origin(Schema::Consecution),
        },
        Clause {
            body: Formula::and([ctx, init, inv_xp, out]),
            head: Formula::and([summary, recursion_obligations(sys, t, Segment::Out).rename(&ren)]),
            origin: origin(Schema::Exit),
        },
    ]
}

/// `(Init ∨ Inv ∧ Trans ∨ Inv ∧ Out) ⇒ CallCtx(args)` over the segments holding the site.
pub fn build_callctx_clause(sys: &ConstraintSystem, caller: &str, site: usize) -> Clause {
    let t = sys.iots(caller);
    let ph = t.placeholder(site).expect("site lowered");
    let inv_x = Formula::app(inv_symbol(t), vars_expr(&t.state_vars));
    let own: Vec<LinExpr> = vars_expr(&ph.inputs).into_iter().chain(vars_expr(&ph.outputs)).collect();
    let summary = sys.summary_of(&ph.callee);
    // The site's own result never constrains its arguments.
    let without_own = |f: &Formula| {
        with_split_summaries(sys, f)
            .replace_apps(&mut |app| (app.symbol == summary && app.args == own).then_some(Formula::True))
    };
    let mut options = Vec::new();
    for seg in &ph.segments {
        options.push(match seg {
            Segment::Init => Formula::and([context(sys, caller), without_own(&t.init)]),
            Segment::Trans => Formula::and([inv_x.clone(), without_own(&t.trans)]),
            Segment::Out => Formula::and([inv_x.clone(), without_own(&t.out)]),
        });
    }
    let callee = sys.procedure(&ph.callee);
    Clause {
        body: Formula::or(options),
        head: Formula::app(callctx_symbol(callee, caller, site), vars_expr(&ph.inputs)),
        origin: Origin { procedure: caller.to_string(), schema: Schema::CallContext(site) },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{interp::box_inputs, parse_program};
    use crate::logic::evaluate;
    use crate::{Int, Interpretation, Lambda, Valuation};

    fn system(src: &str) -> ConstraintSystem {
        build_constraints(&parse_program(src).unwrap()).unwrap()
    }

    /// Brute-force validity of a clause over a box.
    fn valid(c: &Clause, interp: &Interpretation, lo: i64, hi: i64) -> bool {
        let vars: Vec<Var> = c.vars().into_iter().collect();
        let f = c.formula();
        box_inputs(vars.len(), lo, hi).into_iter().all(|xs| {
            let v: Valuation = vars.iter().cloned().zip(xs.into_iter().map(Int::from)).collect();
            evaluate(&f, &v, interp).unwrap()
        })
    }

    fn lam(sym: &Sym, body: impl Fn(&[LinExpr]) -> Formula) -> Lambda {
        let params: Vec<Var> = (0..sym.arity).map(|i| Var::new(format!("p{i}"))).collect();
        let args = vars_expr(&params);
        Lambda::new(params, body(&args))
    }

    fn top(interp: &mut Interpretation, sys: &ConstraintSystem, kind: PredKind) {
        for s in sys.symbols().into_iter().filter(|s| s.kind == kind) {
            interp.insert(s.clone(), Lambda::constant(s.arity, true));
        }
    }

    #[test]
    fn countdown_has_three_clauses() {
        let sys = system("proc main(x) { while (x > 0) { x = x - 1; } return x; }");
        let schemas: Vec<Schema> = sys.clauses.iter().map(|c| c.origin.schema).collect();
        assert_eq!(schemas, vec![Schema::Initiation, Schema::Consecution, Schema::Exit]);
        let kinds: BTreeSet<PredKind> = sys.symbols().iter().map(|s| s.kind).collect();
        assert_eq!(kinds, BTreeSet::from([PredKind::Inv, PredKind::RR, PredKind::Summary]));
    }

    #[test]
    fn countdown_ranking_certifies_and_wrong_ranking_fails() {
        let sys = system("proc main(x) { while (x > 0) { x = x - 1; } return x; }");
        let t = sys.iots("main");
        let mut interp = Interpretation::new();
        top(&mut interp, &sys, PredKind::Inv);
        top(&mut interp, &sys, PredKind::Summary);
        let rr = rr_symbol(t);
        interp.insert(
            rr.clone(),
            lam(&rr, |a| {
                Formula::and([Formula::ge(&a[0], &LinExpr::zero()), Formula::ge(&a[0].minus(&a[1]), &LinExpr::int(1))])
            }),
        );
        assert!(sys.clauses.iter().all(|c| valid(c, &interp, -4, 4)));
        interp.insert(rr.clone(), lam(&rr, |a| Formula::gt(&a[1], &a[0])));
        assert!(!valid(&sys.clauses[1], &interp, -4, 4));
    }

    #[test]
    fn splitting_adds_context_clause_per_site() {
        let src = "proc main() { r = call g(5); } proc g(y) { while (y > 0) { y = y - 1; } return y; }";
        let sys = system(src);
        assert_eq!(sys.clauses.len(), 6);
        let split = sys.split_summary(&SiteRef { caller: "main".into(), index: 1 }).unwrap();
        assert_eq!(split.clauses.len(), 7);
        let ctx = split.clauses.last().unwrap();
        assert_eq!(ctx.origin.schema, Schema::CallContext(1));
        let ctx_sym = callctx_symbol(split.procedure("g"), "main", 1);
        assert_eq!(ctx.conclusions(), BTreeSet::from([ctx_sym.clone()]));
        // The callee's initiation and exit read the context; consecution does not.
        let g_clauses: Vec<&Clause> = split.clauses.iter().filter(|c| c.origin.procedure == "g").collect();
        let reads: Vec<bool> = g_clauses.iter().map(|c| c.premises().contains(&ctx_sym)).collect();
        assert_eq!(reads, vec![true, false, true]);
        assert!(split.symbols().contains(&sum_symbol(split.procedure("g"))));
        assert!(!split.symbols().contains(&ir::summary_symbol(split.procedure("g"))));
    }

    #[test]
    fn context_clause_is_valid_exactly_for_covering_contexts() {
        let src = "proc main() { r = call g(5); } proc g(y) { return y; }";
        let sys = system(src).split_all().unwrap();
        let ctx_sym = callctx_symbol(sys.procedure("g"), "main", 1);
        let clause = sys.clauses.iter().find(|c| matches!(c.origin.schema, Schema::CallContext(_))).unwrap();
        let mut interp = Interpretation::new();
        top(&mut interp, &sys, PredKind::Sum);
        top(&mut interp, &sys, PredKind::Inv);
        interp.insert(ctx_sym.clone(), lam(&ctx_sym, |a| Formula::eq(&a[0], &LinExpr::int(5))));
        assert!(valid(clause, &interp, -6, 6));
        interp.insert(ctx_sym.clone(), lam(&ctx_sym, |a| Formula::eq(&a[0], &LinExpr::int(4))));
        assert!(!valid(clause, &interp, -6, 6));
    }

    #[test]
    fn recursive_calls_carry_ranking_obligations() {
        let sys = system("proc f(x) { r = 0; if (x > 0) { r = call f(x - 1); } return r; }");
        let rec = recrank_symbol("f", 1);
        assert_eq!(sys.recursion.get("f").map(String::as_str), Some("f"));
        let init = &sys.clauses[0];
        assert!(init.conclusions().contains(&rec));
        // RecRank(a, b) = a >= 0 && a - b >= 1 discharges the obligation; the constant false does not.
        let mut interp = Interpretation::new();
        top(&mut interp, &sys, PredKind::Summary);
        top(&mut interp, &sys, PredKind::Inv);
        interp.insert(
            rec.clone(),
            lam(&rec, |a| {
                Formula::and([Formula::ge(&a[0], &LinExpr::zero()), Formula::ge(&a[0].minus(&a[1]), &LinExpr::int(1))])
            }),
        );
        assert!(valid(init, &interp, -3, 3));
        interp.insert(rec.clone(), Lambda::constant(2, false));
        assert!(!valid(init, &interp, -3, 3));
    }

    #[test]
    fn unreachable_procedures_are_excluded() {
        let sys = system("proc main(x) { return x; } proc other(y) { while (true) { y = y; } return y; }");
        assert_eq!(sys.procedures, vec!["main".to_string()]);
        assert_eq!(sys.clauses.len(), 3);
    }

    #[test]
    fn smtlib_export_declares_and_asserts() {
        let sys = system("proc main(x) { while (x > 0) { x = x - 1; } return x; }");
        let text = to_smtlib(&sys);
        assert!(text.starts_with("(set-logic HORN)"));
        assert!(text.contains("(declare-fun Inv_main (Int) Bool)"));
        assert!(text.contains("(declare-fun RR_main (Int Int) Bool)"));
        assert_eq!(text.matches("(assert (forall").count(), 3);
        assert!(text.trim_end().ends_with("(check-sat)"));
        let parsed = crate::logic::smt::parse_sexps(&text).unwrap();
        assert_eq!(parsed.len(), 1 + 3 + 3 + 1);
    }
}
