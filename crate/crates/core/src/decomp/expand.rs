//! Semantics-preserving program expansions: loop unrolling and call inlining.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::ir::{Cond, Procedure, Program, Stmt};
use crate::logic::Var;
use crate::LinExpr;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Expansion {
    /// Peel `k` guarded copies of loop `loop_id`'s body in front of its head.
    Unroll { procedure: String, loop_id: usize, k: usize },
    /// Replace call site `site` by the callee body, recursively up to `depth` levels.
    Inline { caller: String, site: usize, depth: usize },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExpandError {
    #[error("no procedure `{0}`")]
    UnknownProcedure(String),
    #[error("procedure `{procedure}` has no loop {id}")]
    UnknownLoop { procedure: String, id: usize },
    #[error("procedure `{caller}` has no call site {site}")]
    UnknownSite { caller: String, site: usize },
    #[error("expansion count must be at least 1")]
    ZeroCount,
}

pub fn expand(prog: &Program, action: &Expansion) -> Result<Program, ExpandError> {
    let mut out = prog.clone();
    match action {
        Expansion::Unroll { procedure, loop_id, k } => {
            if *k == 0 {
                return Err(ExpandError::ZeroCount);
            }
            let p = out.procedure_mut(procedure).ok_or_else(|| ExpandError::UnknownProcedure(procedure.clone()))?;
            if !unroll_in(&mut p.body, &|id| id == *loop_id, *k, false) {
                return Err(ExpandError::UnknownLoop { procedure: procedure.clone(), id: *loop_id });
            }
            p.renumber();
        }
        Expansion::Inline { caller, site, depth } => {
            if *depth == 0 {
                return Err(ExpandError::ZeroCount);
            }
            let p = prog.procedure(caller).ok_or_else(|| ExpandError::UnknownProcedure(caller.clone()))?;
            if p.site(*site).is_none() {
                return Err(ExpandError::UnknownSite { caller: caller.clone(), site: *site });
            }
            let mut q = p.clone();
            let mut fresh = Fresh::new(p);
            q.body = inline_in(prog, &q.body, &|s| s == *site, *depth, &mut fresh);
            q.renumber();
            *out.procedure_mut(caller).expect("caller exists") = q;
        }
    }
    Ok(out)
}

/// Unrolls every outermost loop of every procedure `k` times.
pub fn unroll_loops(prog: &Program, k: usize) -> Program {
    let mut out = prog.clone();
    for p in &mut out.procedures {
        if unroll_in(&mut p.body, &|_| true, k, true) {
            p.renumber();
        }
    }
    out
}

/// Inlines every call site of the entry procedure up to `depth` levels.
pub fn inline_calls(prog: &Program, depth: usize) -> Program {
    let mut out = prog.clone();
    let Some(p) = prog.procedure(&prog.entry) else { return out };
    if p.call_sites.is_empty() || depth == 0 {
        return out;
    }
    let mut q = p.clone();
    let mut fresh = Fresh::new(p);
    q.body = inline_in(prog, &q.body, &|_| true, depth, &mut fresh);
    q.renumber();
    *out.procedure_mut(&prog.entry).expect("entry exists") = q;
    out
}

/// Unrolls matching loops; with `outermost`, loops nested in a match are left alone.
fn unroll_in(stmts: &mut [Stmt], matches: &dyn Fn(usize) -> bool, k: usize, outermost: bool) -> bool {
    let mut hit = false;
    for s in stmts.iter_mut() {
        match s {
            Stmt::While { id, cond, body } => {
                if matches(*id) {
                    let mut inner = body.clone();
                    if !outermost {
                        unroll_in(&mut inner, matches, k, outermost);
                    }
                    let mut cur = Stmt::While { id: *id, cond: cond.clone(), body: inner };
                    for _ in 0..k {
                        let mut copy = body.clone();
                        copy.push(cur);
                        cur = Stmt::If { cond: cond.clone(), then: copy, els: Vec::new() };
                    }
                    *s = cur;
                    hit = true;
                } else {
                    hit |= unroll_in(body, matches, k, outermost);
                }
            }
            Stmt::If { then, els, .. } => {
                hit |= unroll_in(then, matches, k, outermost);
                hit |= unroll_in(els, matches, k, outermost);
            }
            _ => {}
        }
    }
    hit
}

/// Fresh variable prefixes for inlined bodies.
struct Fresh {
    taken: Vec<String>,
    next: usize,
}

impl Fresh {
    fn new(p: &Procedure) -> Self {
        Fresh { taken: p.variables(), next: 0 }
    }

    fn prefix(&mut self, callee: &str) -> String {
        loop {
            self.next += 1;
            let pre = format!("_{callee}{}_", self.next);
            if !self.taken.iter().any(|v| v.starts_with(&pre)) {
                return pre;
            }
        }
    }
}

fn inline_in(
    prog: &Program,
    stmts: &[Stmt],
    matches: &dyn Fn(usize) -> bool,
    depth: usize,
    fresh: &mut Fresh,
) -> Vec<Stmt> {
    let mut out = Vec::new();
    for s in stmts {
        match s {
            Stmt::Call { site, results, callee, args } if matches(*site) => {
                let body = inline_one(prog, results, callee, args, fresh);
                if depth > 1 {
                    out.extend(inline_in(prog, &body, &|_| true, depth - 1, fresh));
                } else {
                    out.extend(body);
                }
            }
            Stmt::If { cond, then, els } => out.push(Stmt::If {
                cond: cond.clone(),
                then: inline_in(prog, then, matches, depth, fresh),
                els: inline_in(prog, els, matches, depth, fresh),
            }),
            Stmt::While { id, cond, body } => out.push(Stmt::While {
                id: *id,
                cond: cond.clone(),
                body: inline_in(prog, body, matches, depth, fresh),
            }),
            other => out.push(other.clone()),
        }
    }
    out
}

/// The callee body on fresh variables, bracketed by parameter binding,
/// local reset and result assignment.
fn inline_one(prog: &Program, results: &[String], callee: &str, args: &[LinExpr], fresh: &mut Fresh) -> Vec<Stmt> {
    let p = prog.procedure(callee).expect("resolved callee");
    let pre = fresh.prefix(callee);
    let vars = p.variables();
    let names: BTreeMap<String, String> = vars.iter().map(|v| (v.clone(), format!("{pre}{v}"))).collect();
    fresh.taken.extend(names.values().cloned());
    let map: BTreeMap<Var, LinExpr> = names.iter().map(|(a, b)| (Var::new(a), LinExpr::var(Var::new(b)))).collect();
    let mut out = Vec::new();
    for (i, v) in vars.iter().enumerate() {
        let expr = if i < p.params.len() { args[i].clone() } else { LinExpr::zero() };
        out.push(Stmt::Assign { var: names[v].clone(), expr });
    }
    let (body, ret) = match p.body.split_last() {
        Some((Stmt::Return(vals), rest)) => (rest, vals.as_slice()),
        _ => (p.body.as_slice(), &[][..]),
    };
    out.extend(body.iter().map(|s| rename_stmt(s, &names, &map)));
    for (r, e) in results.iter().zip(ret) {
        out.push(Stmt::Assign { var: r.clone(), expr: e.substitute(&map) });
    }
    out
}

fn rename_stmt(s: &Stmt, names: &BTreeMap<String, String>, map: &BTreeMap<Var, LinExpr>) -> Stmt {
    let block = |b: &[Stmt]| b.iter().map(|s| rename_stmt(s, names, map)).collect();
    match s {
        Stmt::Assign { var, expr } => Stmt::Assign { var: names[var].clone(), expr: expr.substitute(map) },
        Stmt::If { cond, then, els } => Stmt::If { cond: rename_cond(cond, map), then: block(then), els: block(els) },
        Stmt::While { id, cond, body } => Stmt::While { id: *id, cond: rename_cond(cond, map), body: block(body) },
        Stmt::Call { site, results, callee, args } => Stmt::Call {
            site: *site,
            results: results.iter().map(|r| names[r].clone()).collect(),
            callee: callee.clone(),
            args: args.iter().map(|a| a.substitute(map)).collect(),
        },
        Stmt::Return(vals) => Stmt::Return(vals.iter().map(|v| v.substitute(map)).collect()),
    }
}

fn rename_cond(c: &Cond, map: &BTreeMap<Var, LinExpr>) -> Cond {
    match c {
        Cond::True | Cond::False | Cond::Nondet => c.clone(),
        Cond::Cmp(a, op, b) => Cond::Cmp(a.substitute(map), *op, b.substitute(map)),
        Cond::Not(inner) => Cond::Not(Box::new(rename_cond(inner, map))),
        Cond::And(cs) => Cond::And(cs.iter().map(|c| rename_cond(c, map)).collect()),
        Cond::Or(cs) => Cond::Or(cs.iter().map(|c| rename_cond(c, map)).collect()),
    }
}
