//! Concrete interpreter with set semantics for nondeterministic branches.
//!
//! Used as the ground-truth oracle: a run either produces the full set of
//! possible outputs or reports that some execution exceeded the step bound.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::ToPrimitive;

use super::ast::{CmpOp, Cond, Program, Stmt};
use crate::LinExpr;

type Env = Vec<i64>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// Every execution returned; the set of possible return tuples.
    Returns(BTreeSet<Vec<i64>>),
    /// Some execution exceeded the step or depth bound.
    Diverges,
}

impl Outcome {
    pub fn terminates(&self) -> bool {
        matches!(self, Outcome::Returns(_))
    }
}

#[derive(Debug)]
struct Diverged;

/// Bounds for one top-level run.
#[derive(Clone, Copy, Debug)]
pub struct Limits {
    /// Loop iterations plus procedure calls, summed over the whole run.
    pub max_steps: u64,
    pub max_depth: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_steps: 100_000, max_depth: 400 }
    }
}

pub struct Interpreter<'a> {
    prog: &'a Program,
    limits: Limits,
    steps: u64,
    memo: BTreeMap<(String, Vec<i64>), BTreeSet<Vec<i64>>>,
    heads: BTreeSet<(usize, Vec<i64>)>,
}

impl<'a> Interpreter<'a> {
    pub fn new(prog: &'a Program, limits: Limits) -> Self {
        Interpreter { prog, limits, steps: 0, memo: BTreeMap::new(), heads: BTreeSet::new() }
    }

    /// Runs `proc_name` on `inputs`.
    pub fn run(&mut self, proc_name: &str, inputs: &[i64]) -> Outcome {
        self.steps = 0;
        self.heads.clear();
        match self.call(proc_name, inputs.to_vec(), 0) {
            Ok(outs) => Outcome::Returns(outs),
            Err(Diverged) => Outcome::Diverges,
        }
    }

    /// Loop-head states `(loop id, variables in declaration order)` visited
    /// by the top-level procedure during the last run.
    pub fn loop_head_states(&self) -> &BTreeSet<(usize, Vec<i64>)> {
        &self.heads
    }

    fn tick(&mut self) -> Result<(), Diverged> {
        self.steps += 1;
        if self.steps > self.limits.max_steps {
            Err(Diverged)
        } else {
            Ok(())
        }
    }

    fn call(&mut self, name: &str, args: Vec<i64>, depth: usize) -> Result<BTreeSet<Vec<i64>>, Diverged> {
        if depth > self.limits.max_depth {
            return Err(Diverged);
        }
        self.tick()?;
        let key = (name.to_string(), args.clone());
        if depth > 0 {
            if let Some(hit) = self.memo.get(&key) {
                return Ok(hit.clone());
            }
        }
        let proc = self.prog.procedure(name).expect("resolved callee");
        let vars = proc.variables();
        let index: BTreeMap<&str, usize> = vars.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
        let mut env = vec![0i64; vars.len()];
        env[..args.len()].copy_from_slice(&args);
        let ctx = Ctx { index: &index, depth };
        let (body, ret) = match proc.body.split_last() {
            Some((Stmt::Return(vals), rest)) => (rest, vals.as_slice()),
            _ => (proc.body.as_slice(), &[][..]),
        };
        let finals = self.block(&ctx, body, BTreeSet::from([env]))?;
        let mut outs = BTreeSet::new();
        for e in &finals {
            outs.insert(ret.iter().map(|r| eval(r, e, &index)).collect::<Vec<_>>());
        }
        self.memo.insert(key, outs.clone());
        Ok(outs)
    }

    fn block(&mut self, ctx: &Ctx, stmts: &[Stmt], mut states: BTreeSet<Env>) -> Result<BTreeSet<Env>, Diverged> {
        for s in stmts {
            if states.is_empty() {
                break;
            }
            states = self.stmt(ctx, s, states)?;
        }
        Ok(states)
    }

    fn stmt(&mut self, ctx: &Ctx, s: &Stmt, states: BTreeSet<Env>) -> Result<BTreeSet<Env>, Diverged> {
        Ok(match s {
            Stmt::Assign { var, expr } => {
                let i = ctx.index[var.as_str()];
                states
                    .into_iter()
                    .map(|mut e| {
                        e[i] = eval(expr, &e, ctx.index);
                        e
                    })
                    .collect()
            }
            Stmt::If { cond, then, els } => {
                let (t, f) = split(cond, states, ctx.index);
                let mut out = self.block(ctx, then, t)?;
                out.extend(self.block(ctx, els, f)?);
                out
            }
            Stmt::While { id, cond, body } => {
                let mut current = states;
                let mut done = BTreeSet::new();
                loop {
                    if ctx.depth == 0 {
                        self.heads.extend(current.iter().map(|e| (*id, e.clone())));
                    }
                    let (enter, exit) = split(cond, current, ctx.index);
                    done.extend(exit);
                    if enter.is_empty() {
                        break;
                    }
                    self.tick()?;
                    current = self.block(ctx, body, enter)?;
                }
                done
            }
            Stmt::Call { callee, args, results, .. } => {
                let mut out = BTreeSet::new();
                for e in states {
                    let argv: Vec<i64> = args.iter().map(|a| eval(a, &e, ctx.index)).collect();
                    for ret in self.call(callee, argv, ctx.depth + 1)? {
                        let mut e2 = e.clone();
                        for (r, v) in results.iter().zip(ret) {
                            e2[ctx.index[r.as_str()]] = v;
                        }
                        out.insert(e2);
                    }
                }
                out
            }
            Stmt::Return(_) => unreachable!("return is only the last statement"),
        })
    }
}

struct Ctx<'p> {
    index: &'p BTreeMap<&'p str, usize>,
    depth: usize,
}

fn eval(e: &LinExpr, env: &[i64], index: &BTreeMap<&str, usize>) -> i64 {
    let mut acc = e.constant_part().to_i64().expect("literal fits i64");
    for (v, c) in e.terms() {
        let c = c.to_i64().expect("coefficient fits i64");
        acc += c * env[index[v.name()]];
    }
    acc
}

/// Possible truth values of a condition.
fn truth(c: &Cond, env: &[i64], index: &BTreeMap<&str, usize>) -> (bool, bool) {
    match c {
        Cond::True => (true, false),
        Cond::False => (false, true),
        Cond::Nondet => (true, true),
        Cond::Cmp(a, op, b) => {
            let (x, y) = (eval(a, env, index), eval(b, env, index));
            let r = match op {
                CmpOp::Lt => x < y,
                CmpOp::Le => x <= y,
                CmpOp::Gt => x > y,
                CmpOp::Ge => x >= y,
                CmpOp::Eq => x == y,
                CmpOp::Ne => x != y,
            };
            (r, !r)
        }
        Cond::Not(inner) => {
            let (t, f) = truth(inner, env, index);
            (f, t)
        }
        Cond::And(cs) => {
            let parts: Vec<_> = cs.iter().map(|c| truth(c, env, index)).collect();
            (parts.iter().all(|p| p.0), parts.iter().any(|p| p.1))
        }
        Cond::Or(cs) => {
            let parts: Vec<_> = cs.iter().map(|c| truth(c, env, index)).collect();
            (parts.iter().any(|p| p.0), parts.iter().all(|p| p.1))
        }
    }
}

fn split(c: &Cond, states: BTreeSet<Env>, index: &BTreeMap<&str, usize>) -> (BTreeSet<Env>, BTreeSet<Env>) {
    let mut t = BTreeSet::new();
    let mut f = BTreeSet::new();
    for e in states {
        let (can_t, can_f) = truth(c, &e, index);
        if can_t {
            t.insert(e.clone());
        }
        if can_f {
            f.insert(e);
        }
    }
    (t, f)
}

/// Enumerates all input vectors in `[lo, hi]^n`.
pub fn box_inputs(n: usize, lo: i64, hi: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v| {
                (lo..=hi).map(move |x| {
                    let mut w = v.clone();
                    w.push(x);
                    w
                })
            })
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_program;

    fn run(src: &str, inputs: &[i64]) -> Outcome {
        let p = parse_program(src).unwrap();
        Interpreter::new(&p, Limits::default()).run(&p.entry, inputs)
    }

    #[test]
    fn countdown_returns_zero_or_input() {
        let src = "proc main(x) { while (x > 0) { x = x - 1; } return x; }";
        assert_eq!(run(src, &[3]), Outcome::Returns(BTreeSet::from([vec![0]])));
        assert_eq!(run(src, &[-2]), Outcome::Returns(BTreeSet::from([vec![-2]])));
    }

    #[test]
    fn infinite_loop_diverges() {
        assert_eq!(run("proc main(x) { while (true) { x = x; } return; }", &[0]), Outcome::Diverges);
    }

    #[test]
    fn nondeterminism_collects_all_outcomes() {
        let src = "proc main(x) { if (*) { x = 1; } else { x = 2; } return x; }";
        assert_eq!(run(src, &[0]), Outcome::Returns(BTreeSet::from([vec![1], vec![2]])));
    }

    #[test]
    fn recursion_and_unbounded_recursion() {
        let src = "proc f(x) { r = 0; if (x > 0) { r = call f(x - 1); r = r + 1; } return r; }";
        assert_eq!(run(src, &[4]), Outcome::Returns(BTreeSet::from([vec![4]])));
        let bad = "proc f(x) { r = call f(x); return r; }";
        assert_eq!(run(bad, &[1]), Outcome::Diverges);
    }

    #[test]
    fn box_enumeration() {
        assert_eq!(box_inputs(2, -1, 1).len(), 9);
        assert_eq!(box_inputs(0, -1, 1), vec![Vec::<i64>::new()]);
    }
}
