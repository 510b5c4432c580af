//! Exhaustive reference solver: enumerates the template parameter grid and
//! certifies each point by enumerating every clause's universals over a box.

use std::collections::BTreeMap;

use num_traits::ToPrimitive;

use super::cegis::{PredicateSolution, Solution, Subproblem};
use super::SynthError;
use crate::logic::{expand_apps, Rel, Sym, Var};
use crate::{Formula, Int, Interpretation, Valuation};

/// Ground formula compiled against a variable index.
enum Op {
    Const(bool),
    Le(Vec<(usize, i64)>, i64),
    Eq(Vec<(usize, i64)>, i64),
    And(Vec<Op>),
    Or(Vec<Op>),
}

fn compile(f: &Formula, index: &BTreeMap<Var, usize>) -> Op {
    match f {
        Formula::True => Op::Const(true),
        Formula::False => Op::Const(false),
        Formula::Atom(a) => {
            let terms = a.expr.terms().map(|(v, c)| (index[v], c.to_i64().expect("small coefficient"))).collect();
            let c = a.expr.constant_part().to_i64().expect("small constant");
            match a.rel {
                Rel::Le => Op::Le(terms, c),
                Rel::Lt => Op::Le(terms, c + 1),
                Rel::Eq => Op::Eq(terms, c),
            }
        }
        Formula::And(fs) => Op::And(fs.iter().map(|g| compile(g, index)).collect()),
        Formula::Or(fs) => Op::Or(fs.iter().map(|g| compile(g, index)).collect()),
        other => unreachable!("not in negation normal form: {other:?}"),
    }
}

fn eval(op: &Op, env: &[i64]) -> bool {
    let lin = |t: &[(usize, i64)], c: i64| t.iter().fold(c, |acc, &(v, a)| acc + a * env[v]);
    match op {
        Op::Const(b) => *b,
        Op::Le(t, c) => lin(t, *c) <= 0,
        Op::Eq(t, c) => lin(t, *c) == 0,
        Op::And(ops) => ops.iter().all(|o| eval(o, env)),
        Op::Or(ops) => ops.iter().any(|o| eval(o, env)),
    }
}

/// Whether `f` (free of unknowns) holds for every assignment of its variables over `[lo, hi]`.
pub fn valid_on_box(f: &Formula, lo: i64, hi: i64) -> bool {
    find_violation(f, lo, hi).is_none()
}

/// First assignment over `[lo, hi]` falsifying `f`, in odometer order.
pub fn find_violation(f: &Formula, lo: i64, hi: i64) -> Option<Valuation> {
    let vars: Vec<Var> = f.free_vars().into_iter().collect();
    let index: BTreeMap<Var, usize> = vars.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();
    let op = compile(&f.nnf().simplify(), &index);
    let mut env = vec![lo; vars.len()];
    loop {
        if !eval(&op, &env) {
            return Some(vars.iter().cloned().zip(env.iter().map(|x| Int::from(*x))).collect());
        }
        let mut i = 0;
        loop {
            if i == env.len() {
                return None;
            }
            if env[i] < hi {
                env[i] += 1;
                break;
            }
            env[i] = lo;
            i += 1;
        }
    }
}

#[derive(Clone, Debug)]
pub struct BruteOutcome {
    pub solved: bool,
    pub solutions: Solution,
    pub points: u128,
}

/// Limits on enumeration size.
#[derive(Clone, Copy, Debug)]
pub struct BruteLimits {
    pub max_grid: u128,
    pub max_ground: u128,
}

impl Default for BruteLimits {
    fn default() -> Self {
        BruteLimits { max_grid: 200_000, max_ground: 10_000_000 }
    }
}

/// Returns the first grid point (in parameter order) certifying all clauses on the box.
pub fn brute_force_solve(sp: &Subproblem, lo: i64, hi: i64, limits: BruteLimits) -> Result<BruteOutcome, SynthError> {
    let grid: u128 = sp.unknowns.iter().map(|t| t.grid_size()).product();
    if grid > limits.max_grid {
        return Err(SynthError::TooLarge(format!("{grid} parameter points")));
    }
    let width = (hi - lo + 1) as u128;
    for c in &sp.clauses {
        let n = c.vars().len() as u32;
        if width.checked_pow(n).is_none_or(|g| g > limits.max_ground) {
            return Err(SynthError::TooLarge(format!("{n} universals over the box")));
        }
    }
    let params: Vec<(usize, usize)> =
        sp.unknowns.iter().enumerate().flat_map(|(ti, t)| (0..t.params.len()).map(move |pi| (ti, pi))).collect();
    let mut point: Vec<i64> = params.iter().map(|&(t, p)| sp.unknowns[t].params[p].lo).collect();
    let mut tried = 0u128;
    loop {
        tried += 1;
        let mut sol = Solution::new();
        for (ti, t) in sp.unknowns.iter().enumerate() {
            let v: Valuation = params
                .iter()
                .zip(&point)
                .filter(|((pt, _), _)| *pt == ti)
                .map(|((_, pi), x)| (t.params[*pi].var.clone(), Int::from(*x)))
                .collect();
            sol.insert(t.symbol.clone(), PredicateSolution::from_params(t, v)?);
        }
        let mut interp: Interpretation = sp.fixed.clone();
        for (s, p) in &sol {
            interp.insert(Sym::clone(s), p.formula.clone());
        }
        let ok = sp.clauses.iter().all(|c| valid_on_box(&expand_apps(&c.formula(), &interp), lo, hi));
        if ok {
            return Ok(BruteOutcome { solved: true, solutions: sol, points: tried });
        }
        let mut i = 0;
        loop {
            if i == point.len() {
                return Ok(BruteOutcome { solved: false, solutions: Solution::new(), points: tried });
            }
            let (t, p) = params[i];
            if point[i] < sp.unknowns[t].params[p].hi {
                point[i] += 1;
                break;
            }
            point[i] = sp.unknowns[t].params[p].lo;
            i += 1;
        }
    }
}
