//! Finite-domain backend: propagation and branching over bounded integers.
//!
//! Variables without declared bounds range over the configured box, so a
//! verification query is exhaustive over that box and nothing beyond it.

use std::collections::BTreeMap;

use num_traits::ToPrimitive;

use super::backend::{BackendError, BackendFactory, CheckResult, Pref, SolverBackend};
use crate::logic::{Rel, Var};
use crate::{Formula, Int, Valuation};

#[derive(Clone, Debug)]
struct Lin {
    terms: Vec<(usize, i64)>,
    c: i64,
}

#[derive(Clone, Debug)]
enum Node {
    True,
    False,
    /// `lin ≤ 0`
    Le(Lin),
    /// `lin = 0`
    Eq(Lin),
    And(Vec<Node>),
    Or(Vec<Node>),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Tri {
    Yes,
    No,
    Maybe,
}

type Dom = Vec<(i64, i64)>;

struct Conflict;

fn range(l: &Lin, d: &Dom) -> (i128, i128) {
    let mut lo = l.c as i128;
    let mut hi = l.c as i128;
    for &(v, a) in &l.terms {
        let (x, y) = (a as i128 * d[v].0 as i128, a as i128 * d[v].1 as i128);
        lo += x.min(y);
        hi += x.max(y);
    }
    (lo, hi)
}

fn status(n: &Node, d: &Dom) -> Tri {
    match n {
        Node::True => Tri::Yes,
        Node::False => Tri::No,
        Node::Le(l) => {
            let (lo, hi) = range(l, d);
            if hi <= 0 {
                Tri::Yes
            } else if lo > 0 {
                Tri::No
            } else {
                Tri::Maybe
            }
        }
        Node::Eq(l) => {
            let (lo, hi) = range(l, d);
            if lo == 0 && hi == 0 {
                Tri::Yes
            } else if lo > 0 || hi < 0 {
                Tri::No
            } else {
                Tri::Maybe
            }
        }
        Node::And(cs) => {
            let mut all = true;
            for c in cs {
                match status(c, d) {
                    Tri::No => return Tri::No,
                    Tri::Maybe => all = false,
                    Tri::Yes => {}
                }
            }
            if all {
                Tri::Yes
            } else {
                Tri::Maybe
            }
        }
        Node::Or(cs) => {
            let mut none = true;
            for c in cs {
                match status(c, d) {
                    Tri::Yes => return Tri::Yes,
                    Tri::Maybe => none = false,
                    Tri::No => {}
                }
            }
            if none {
                Tri::No
            } else {
                Tri::Maybe
            }
        }
    }
}

fn floor_div(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn ceil_div(a: i128, b: i128) -> i128 {
    -floor_div(-a, b)
}

fn clamp64(v: i128) -> i64 {
    v.clamp(i64::MIN as i128, i64::MAX as i128) as i64
}

/// Bounds propagation for `Σ a·x + c ≤ 0`.
fn tighten(l: &Lin, d: &mut Dom) -> Result<bool, Conflict> {
    let (lo, _) = range(l, d);
    if lo > 0 {
        return Err(Conflict);
    }
    let mut changed = false;
    for &(v, a) in &l.terms {
        let (x, y) = (a as i128 * d[v].0 as i128, a as i128 * d[v].1 as i128);
        let rest = lo - x.min(y);
        let r = -rest;
        let a = a as i128;
        if a > 0 {
            let ub = clamp64(floor_div(r, a));
            if ub < d[v].1 {
                d[v].1 = ub;
                changed = true;
            }
        } else {
            let lb = clamp64(ceil_div(r, a));
            if lb > d[v].0 {
                d[v].0 = lb;
                changed = true;
            }
        }
        if d[v].0 > d[v].1 {
            return Err(Conflict);
        }
    }
    Ok(changed)
}

fn negate(l: &Lin) -> Lin {
    Lin { terms: l.terms.iter().map(|&(v, a)| (v, -a)).collect(), c: -l.c }
}

fn propagate(n: &Node, d: &mut Dom) -> Result<bool, Conflict> {
    match n {
        Node::True => Ok(false),
        Node::False => Err(Conflict),
        Node::Le(l) => tighten(l, d),
        Node::Eq(l) => Ok(tighten(l, d)? | tighten(&negate(l), d)?),
        Node::And(cs) => {
            let mut changed = false;
            for c in cs {
                changed |= propagate(c, d)?;
            }
            Ok(changed)
        }
        Node::Or(cs) => {
            let mut live = None;
            let mut count = 0;
            for c in cs {
                match status(c, d) {
                    Tri::Yes => return Ok(false),
                    Tri::Maybe => {
                        count += 1;
                        live = Some(c);
                    }
                    Tri::No => {}
                }
            }
            match (count, live) {
                (0, _) => Err(Conflict),
                (1, Some(c)) => propagate(c, d),
                _ => Ok(false),
            }
        }
    }
}

/// An undecided disjunction reachable through conjunctions, with its live count.
fn find_or<'a>(n: &'a Node, d: &Dom, branched: &[*const Node], best: &mut Option<(&'a Node, usize)>) {
    match n {
        Node::And(cs) => cs.iter().for_each(|c| find_or(c, d, branched, best)),
        Node::Or(cs) => {
            if status(n, d) != Tri::Maybe || branched.contains(&(n as *const Node)) {
                return;
            }
            let live = cs.iter().filter(|c| status(c, d) != Tri::No).count();
            if live >= 2 && best.is_none_or(|(_, b)| live < b) {
                *best = Some((n, live));
            }
        }
        _ => {}
    }
}

struct Search<'p> {
    prefs: &'p [Pref],
    branched: Vec<*const Node>,
    nodes: u64,
    limit: u64,
}

impl<'p> Search<'p> {
    fn run(&mut self, mut d: Dom, cons: &mut Vec<&Node>) -> Result<Option<Dom>, BackendError> {
        self.nodes += 1;
        if self.nodes > self.limit {
            return Err(BackendError::Exhausted);
        }
        loop {
            let mut changed = false;
            for c in cons.iter() {
                match propagate(c, &mut d) {
                    Err(Conflict) => return Ok(None),
                    Ok(ch) => changed |= ch,
                }
            }
            if !changed {
                break;
            }
        }
        let mut best = None;
        for c in cons.iter() {
            find_or(c, &d, &self.branched, &mut best);
        }
        if let Some((or @ Node::Or(cs), _)) = best {
            self.branched.push(or as *const Node);
            let mut found = None;
            for c in cs {
                if status(c, &d) == Tri::No {
                    continue;
                }
                cons.push(c);
                let r = self.run(d.clone(), cons);
                cons.pop();
                match r {
                    Ok(None) => {}
                    other => {
                        found = Some(other);
                        break;
                    }
                }
            }
            self.branched.pop();
            return found.unwrap_or(Ok(None));
        }
        let Some(v) = (0..d.len()).find(|&v| d[v].0 < d[v].1) else {
            return Ok(Some(d));
        };
        let (lo, hi) = d[v];
        let target = match self.prefs[v] {
            Pref::Zero => 0,
            Pref::Toward(t) => t,
        };
        let pick = target.clamp(lo, hi);
        let mut parts = vec![(pick, pick)];
        // Halves nearest the picked value come first.
        let left: Vec<(i64, i64)> = if pick > lo {
            {
                let mid = lo + (pick - 1 - lo) / 2;
                [(mid + 1, pick - 1), (lo, mid)].into_iter().filter(|r| r.0 <= r.1).collect()
            }
        } else {
            Default::default()
        };
        let right: Vec<(i64, i64)> = if pick < hi {
            {
                let mid = pick + 1 + (hi - pick - 1) / 2;
                [(pick + 1, mid), (mid + 1, hi)].into_iter().filter(|r| r.0 <= r.1).collect()
            }
        } else {
            Default::default()
        };
        if target < pick {
            parts.extend(left);
            parts.extend(right);
        } else {
            parts.extend(right);
            parts.extend(left);
        }
        for part in parts {
            let mut d2 = d.clone();
            d2[v] = part;
            if let Some(sol) = self.run(d2, cons)? {
                return Ok(Some(sol));
            }
        }
        Ok(None)
    }
}

struct Frame {
    decls: Vec<(Var, Option<(i64, i64)>)>,
    asserts: Vec<Formula>,
}

/// Propagation-based solver over bounded integer domains.
pub struct FiniteBackend {
    bounds: (i64, i64),
    frames: Vec<Frame>,
    prefs: BTreeMap<Var, Pref>,
    node_limit: u64,
}

impl FiniteBackend {
    /// Unbounded variables range over `[lo, hi]`.
    pub fn new(lo: i64, hi: i64) -> Self {
        FiniteBackend {
            bounds: (lo, hi),
            frames: vec![Frame { decls: Vec::new(), asserts: Vec::new() }],
            prefs: BTreeMap::new(),
            node_limit: 500_000,
        }
    }

    pub fn with_node_limit(mut self, limit: u64) -> Self {
        self.node_limit = limit;
        self
    }

    fn compile(&self, f: &Formula, index: &mut BTreeMap<Var, usize>) -> Result<Node, BackendError> {
        Ok(match f {
            Formula::True => Node::True,
            Formula::False => Node::False,
            Formula::Atom(a) => {
                let small =
                    |v: &Int| v.to_i64().ok_or_else(|| BackendError::Unsupported(format!("constant {v} out of range")));
                let mut terms = Vec::new();
                for (v, c) in a.expr.terms() {
                    let n = index.len();
                    let i = *index.entry(v.clone()).or_insert(n);
                    terms.push((i, small(c)?));
                }
                let c = small(a.expr.constant_part())?;
                match a.rel {
                    Rel::Le => Node::Le(Lin { terms, c }),
                    Rel::Lt => Node::Le(Lin { terms, c: c + 1 }),
                    Rel::Eq => Node::Eq(Lin { terms, c }),
                }
            }
            Formula::And(fs) => Node::And(fs.iter().map(|g| self.compile(g, index)).collect::<Result<_, _>>()?),
            Formula::Or(fs) => Node::Or(fs.iter().map(|g| self.compile(g, index)).collect::<Result<_, _>>()?),
            Formula::App(app) => {
                return Err(BackendError::Unsupported(format!("uninterpreted `{}`", app.symbol.name())))
            }
            Formula::Not(_) | Formula::Implies(..) => unreachable!("negation normal form"),
        })
    }
}

impl SolverBackend for FiniteBackend {
    fn push(&mut self) {
        self.frames.push(Frame { decls: Vec::new(), asserts: Vec::new() });
    }

    fn pop(&mut self) {
        if self.frames.len() > 1 {
            self.frames.pop();
        }
    }

    fn declare(&mut self, var: &Var, bounds: Option<(i64, i64)>) {
        self.frames.last_mut().unwrap().decls.push((var.clone(), bounds));
    }

    fn assert(&mut self, f: &Formula) -> Result<(), BackendError> {
        self.frames.last_mut().unwrap().asserts.push(f.nnf().simplify());
        Ok(())
    }

    fn prefer(&mut self, var: &Var, pref: Pref) {
        self.prefs.insert(var.clone(), pref);
    }

    fn check(&mut self) -> Result<CheckResult, BackendError> {
        let mut index = BTreeMap::new();
        let mut bounds: BTreeMap<Var, (i64, i64)> = BTreeMap::new();
        for fr in &self.frames {
            for (v, b) in &fr.decls {
                let n = index.len();
                index.entry(v.clone()).or_insert(n);
                bounds.insert(v.clone(), b.unwrap_or(self.bounds));
            }
        }
        let mut nodes = Vec::new();
        for fr in &self.frames {
            for f in &fr.asserts {
                nodes.push(self.compile(f, &mut index)?);
            }
        }
        let mut vars: Vec<Var> = vec![Var::new(""); index.len()];
        for (v, &i) in &index {
            vars[i] = v.clone();
        }
        let dom: Dom = vars.iter().map(|v| bounds.get(v).copied().unwrap_or(self.bounds)).collect();
        let prefs: Vec<Pref> = vars.iter().map(|v| self.prefs.get(v).copied().unwrap_or(Pref::Zero)).collect();
        let mut search = Search { prefs: &prefs, branched: Vec::new(), nodes: 0, limit: self.node_limit };
        let mut cons: Vec<&Node> = nodes.iter().collect();
        match search.run(dom, &mut cons)? {
            None => Ok(CheckResult::Unsat),
            Some(d) => Ok(CheckResult::Sat(
                vars.into_iter().zip(d).map(|(v, (x, _))| (v, Int::from(x))).collect::<Valuation>(),
            )),
        }
    }

    fn is_complete(&self) -> bool {
        false
    }
}

/// Builds finite backends over a fixed box.
#[derive(Clone, Copy, Debug)]
pub struct FiniteFactory {
    pub lo: i64,
    pub hi: i64,
}

impl BackendFactory for FiniteFactory {
    fn create(&self) -> Result<Box<dyn SolverBackend>, BackendError> {
        Ok(Box::new(FiniteBackend::new(self.lo, self.hi)))
    }

    fn describe(&self) -> String {
        format!("builtin[{},{}]", self.lo, self.hi)
    }
}
