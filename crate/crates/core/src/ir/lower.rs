//! Lowering of structured procedures to input/output transition systems.
//!
//! All loop heads of a procedure are fused into one state vector; when more
//! than one location exists, a location variable `pc!` selects the loop head
//! (`0` stands for the exit location reached without passing a loop).

use std::collections::{BTreeMap, BTreeSet};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use super::ast::{CmpOp, Cond, Procedure, Program, Stmt};
use super::IrError;
use crate::logic::{PredKind, PredicateSymbol, Sym, Var};
use crate::{Formula, LinExpr};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub enum Segment {
    Init,
    Trans,
    Out,
}

/// Uninterpreted summary application standing for one call site.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Placeholder {
    pub site: usize,
    pub callee: String,
    pub inputs: Vec<Var>,
    pub outputs: Vec<Var>,
    pub segments: BTreeSet<Segment>,
    /// Set for calls into the caller's own recursive component: `1` on paths
    /// through the call, `0` on the other paths of the same segment.
    pub hit: Option<Var>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Iots {
    pub procedure: String,
    pub input_vars: Vec<Var>,
    pub output_vars: Vec<Var>,
    pub state_vars: Vec<Var>,
    /// Copies of the inputs carried unchanged through the state (recursive procedures only).
    pub ghost_inputs: Vec<Var>,
    /// Over `input_vars`, `state_vars` and intermediates.
    pub init: Formula,
    /// Over `state_vars`, their primed copies and intermediates.
    pub trans: Formula,
    /// Over `state_vars` (unprimed) and `output_vars` and intermediates.
    pub out: Formula,
    pub placeholders: Vec<Placeholder>,
    /// Location variable, when more than one location exists.
    pub pc: Option<Var>,
    /// Values `pc!` ranges over: loop ids, and `0` for the exit reached without looping.
    pub locations: Vec<i64>,
}

impl Iots {
    pub fn primed_state(&self) -> Vec<Var> {
        self.state_vars.iter().map(Var::primed).collect()
    }

    pub fn placeholder(&self, site: usize) -> Option<&Placeholder> {
        self.placeholders.iter().find(|p| p.site == site)
    }

    pub fn segment(&self, seg: Segment) -> &Formula {
        match seg {
            Segment::Init => &self.init,
            Segment::Trans => &self.trans,
            Segment::Out => &self.out,
        }
    }
}

pub fn input_var(param: &str) -> Var {
    Var::new(param).tagged("in")
}

pub fn output_var(i: usize) -> Var {
    Var::new("ret").tagged(i)
}

pub fn ghost_var(param: &str) -> Var {
    Var::new(param).tagged("0")
}

fn site_in(site: usize, j: usize) -> Var {
    Var::new(format!("cs{site}")).tagged(format!("in{j}"))
}

fn site_out(site: usize, j: usize) -> Var {
    Var::new(format!("cs{site}")).tagged(format!("out{j}"))
}

fn site_hit(site: usize) -> Var {
    Var::new(format!("cs{site}")).tagged("hit")
}

/// The `Summary` unknown of a procedure: arity `|params| + returns`.
pub fn summary_symbol(p: &Procedure) -> Sym {
    PredicateSymbol::new(PredKind::Summary, p.name.clone(), io_roles(p)).into_sym()
}

pub fn io_roles(p: &Procedure) -> Vec<String> {
    p.params.iter().map(|x| format!("in:{x}")).chain((0..p.returns).map(|i| format!("out:{i}"))).collect()
}

/// Procedures that belong to a call-graph cycle, keyed to their component index.
pub fn recursive_components(prog: &Program) -> BTreeMap<String, usize> {
    let mut g = DiGraph::<&str, ()>::new();
    let nodes: BTreeMap<&str, _> =
        prog.procedures.iter().map(|p| (p.name.as_str(), g.add_node(p.name.as_str()))).collect();
    for p in &prog.procedures {
        for s in &p.call_sites {
            g.update_edge(nodes[p.name.as_str()], nodes[s.callee.as_str()], ());
        }
    }
    let mut out = BTreeMap::new();
    let mut sccs = tarjan_scc(&g);
    sccs.reverse();
    let mut comp = 0;
    for scc in sccs {
        let cyclic = scc.len() > 1 || g.contains_edge(scc[0], scc[0]);
        if cyclic {
            for n in scc {
                out.insert(g[n].to_string(), comp);
            }
            comp += 1;
        }
    }
    out
}

#[derive(Clone, Debug, Default)]
pub struct LowerOptions {
    pub ghost_inputs: bool,
    pub recursive_sites: BTreeSet<usize>,
}

/// Lowers every procedure, adding ghost inputs and hit markers for recursion.
pub fn lower_program(prog: &Program) -> Result<BTreeMap<String, Iots>, IrError> {
    let comps = recursive_components(prog);
    let mut out = BTreeMap::new();
    for p in &prog.procedures {
        let opts = match comps.get(&p.name) {
            Some(c) => LowerOptions {
                ghost_inputs: true,
                recursive_sites: p
                    .call_sites
                    .iter()
                    .filter(|s| comps.get(&s.callee) == Some(c))
                    .map(|s| s.id)
                    .collect(),
            },
            None => LowerOptions::default(),
        };
        out.insert(p.name.clone(), lower_procedure(prog, p, &opts)?);
    }
    Ok(out)
}

/// Lowers a procedure without recursion bookkeeping.
pub fn lower_to_iots(prog: &Program, p: &Procedure) -> Result<Iots, IrError> {
    lower_procedure(prog, p, &LowerOptions::default())
}

#[derive(Clone)]
enum Frame<'s> {
    Stmts(&'s [Stmt]),
    Back(usize),
}

enum End {
    Loop(usize),
    Exit(Vec<LinExpr>),
}

#[derive(Clone)]
struct PathState {
    map: BTreeMap<Var, LinExpr>,
    conds: Vec<Formula>,
    sites: BTreeSet<usize>,
}

struct LoopInfo<'s> {
    cond: &'s Cond,
    body: &'s [Stmt],
    cont: Vec<Frame<'s>>,
}

fn collect_loops<'s>(stmts: &'s [Stmt], cont: &[Frame<'s>], out: &mut BTreeMap<usize, LoopInfo<'s>>) {
    for (i, s) in stmts.iter().enumerate() {
        let mut here = cont.to_vec();
        here.push(Frame::Stmts(&stmts[i + 1..]));
        match s {
            Stmt::While { id, cond, body } => {
                let mut inner = here.clone();
                inner.push(Frame::Back(*id));
                collect_loops(body, &inner, out);
                out.insert(*id, LoopInfo { cond, body, cont: here });
            }
            Stmt::If { then, els, .. } => {
                collect_loops(then, &here, out);
                collect_loops(els, &here, out);
            }
            _ => {}
        }
    }
}

struct Lowerer<'a> {
    prog: &'a Program,
    opts: &'a LowerOptions,
    nondet: usize,
    placeholders: BTreeMap<usize, Placeholder>,
}

impl<'a> Lowerer<'a> {
    fn cond(&mut self, c: &Cond, map: &BTreeMap<Var, LinExpr>) -> Formula {
        match c {
            Cond::True => Formula::True,
            Cond::False => Formula::False,
            Cond::Nondet => {
                self.nondet += 1;
                let v = Var::new("nd").tagged(self.nondet);
                Formula::ge(&LinExpr::var(v), &LinExpr::int(1))
            }
            Cond::Cmp(a, op, b) => {
                let (a, b) = (a.substitute(map), b.substitute(map));
                match op {
                    CmpOp::Lt => Formula::lt(&a, &b),
                    CmpOp::Le => Formula::le(&a, &b),
                    CmpOp::Gt => Formula::gt(&a, &b),
                    CmpOp::Ge => Formula::ge(&a, &b),
                    CmpOp::Eq => Formula::eq(&a, &b),
                    CmpOp::Ne => Formula::or([Formula::lt(&a, &b), Formula::gt(&a, &b)]),
                }
                .simplify()
            }
            Cond::Not(inner) => Formula::not(self.cond(inner, map)).nnf(),
            Cond::And(cs) => Formula::and(cs.iter().map(|c| self.cond(c, map)).collect::<Vec<_>>()),
            Cond::Or(cs) => Formula::or(cs.iter().map(|c| self.cond(c, map)).collect::<Vec<_>>()),
        }
    }

    fn execute<'s>(&mut self, frames: Vec<Frame<'s>>, state: PathState, segment: Segment) -> Vec<(End, PathState)> {
        let mut done = Vec::new();
        let mut work = vec![(frames, state)];
        while let Some((mut frames, mut st)) = work.pop() {
            if st.conds.iter().any(Formula::is_false) {
                continue;
            }
            let Some(top) = frames.pop() else {
                done.push((End::Exit(Vec::new()), st));
                continue;
            };
            let stmts = match top {
                Frame::Back(id) => {
                    done.push((End::Loop(id), st));
                    continue;
                }
                Frame::Stmts(s) => s,
            };
            let Some((first, rest)) = stmts.split_first() else {
                work.push((frames, st));
                continue;
            };
            frames.push(Frame::Stmts(rest));
            match first {
                Stmt::Assign { var, expr } => {
                    let e = expr.substitute(&st.map);
                    st.map.insert(Var::new(var), e);
                    work.push((frames, st));
                }
                Stmt::If { cond, then, els } => {
                    let c = self.cond(cond, &st.map);
                    let mut f_frames = frames.clone();
                    let mut f_st = st.clone();
                    f_st.conds.push(Formula::not(c.clone()).nnf());
                    f_frames.push(Frame::Stmts(els));
                    st.conds.push(c);
                    frames.push(Frame::Stmts(then));
                    work.push((f_frames, f_st));
                    work.push((frames, st));
                }
                Stmt::While { id, .. } => done.push((End::Loop(*id), st)),
                Stmt::Call { site, results, callee, args } => {
                    self.call(*site, callee, args, results, &mut st, segment);
                    work.push((frames, st));
                }
                Stmt::Return(vals) => {
                    let vals = vals.iter().map(|v| v.substitute(&st.map)).collect();
                    done.push((End::Exit(vals), st));
                }
            }
        }
        done
    }

    fn call(
        &mut self,
        site: usize,
        callee: &str,
        args: &[LinExpr],
        results: &[String],
        st: &mut PathState,
        segment: Segment,
    ) {
        let target = self.prog.procedure(callee).expect("resolved callee");
        let inputs: Vec<Var> = (0..args.len()).map(|j| site_in(site, j)).collect();
        let outputs: Vec<Var> = (0..target.returns).map(|j| site_out(site, j)).collect();
        for (v, a) in inputs.iter().zip(args) {
            st.conds.push(Formula::eq(&LinExpr::var(v.clone()), &a.substitute(&st.map)));
        }
        let app_args = inputs.iter().chain(&outputs).map(|v| LinExpr::var(v.clone())).collect();
        st.conds.push(Formula::app(summary_symbol(target), app_args));
        for (r, o) in results.iter().zip(&outputs) {
            st.map.insert(Var::new(r), LinExpr::var(o.clone()));
        }
        let recursive = self.opts.recursive_sites.contains(&site);
        if recursive {
            st.conds.push(Formula::eq(&LinExpr::var(site_hit(site)), &LinExpr::int(1)));
        }
        st.sites.insert(site);
        let entry = self.placeholders.entry(site).or_insert_with(|| Placeholder {
            site,
            callee: callee.to_string(),
            inputs,
            outputs,
            segments: BTreeSet::new(),
            hit: recursive.then(|| site_hit(site)),
        });
        entry.segments.insert(segment);
    }

    /// Adds `hit = 0` to the paths of a segment that bypass a recursive call site.
    fn mark_bypass(&self, paths: &mut [(End, PathState)], segment: Segment) {
        let sites: Vec<(usize, Var)> = self
            .placeholders
            .values()
            .filter(|p| p.segments.contains(&segment))
            .filter_map(|p| p.hit.clone().map(|h| (p.site, h)))
            .collect();
        for (_, st) in paths.iter_mut() {
            for (site, hit) in &sites {
                if !st.sites.contains(site) {
                    st.conds.push(Formula::eq(&LinExpr::var(hit.clone()), &LinExpr::int(0)));
                }
            }
        }
    }
}

/// Builds `(Init, Trans, Out)` by symbolic execution of the loop-free segments.
pub fn lower_procedure(prog: &Program, p: &Procedure, opts: &LowerOptions) -> Result<Iots, IrError> {
    let mut loops = BTreeMap::new();
    collect_loops(&p.body, &[], &mut loops);

    let vars: Vec<Var> = p.variables().iter().map(Var::new).collect();
    let ghosts: Vec<Var> = if opts.ghost_inputs { p.params.iter().map(|x| ghost_var(x)).collect() } else { Vec::new() };
    let input_vars: Vec<Var> = p.params.iter().map(|x| input_var(x)).collect();
    let output_vars: Vec<Var> = (0..p.returns).map(output_var).collect();
    let ret_exprs: Vec<LinExpr> = match p.body.last() {
        Some(Stmt::Return(vals)) => vals.clone(),
        _ => Vec::new(),
    };

    let mut lw = Lowerer { prog, opts, nondet: 0, placeholders: BTreeMap::new() };

    let mut init_map = BTreeMap::new();
    for v in &vars {
        let start = match p.params.iter().position(|x| x == v.name()) {
            Some(i) => LinExpr::var(input_vars[i].clone()),
            None => LinExpr::int(0),
        };
        init_map.insert(v.clone(), start);
    }
    for (g, i) in ghosts.iter().zip(&input_vars) {
        init_map.insert(g.clone(), LinExpr::var(i.clone()));
    }
    let init_state = PathState { map: init_map, conds: Vec::new(), sites: BTreeSet::new() };
    let mut init_paths = lw.execute(vec![Frame::Stmts(&p.body)], init_state, Segment::Init);
    lw.mark_bypass(&mut init_paths, Segment::Init);

    let identity: BTreeMap<Var, LinExpr> =
        vars.iter().chain(&ghosts).map(|v| (v.clone(), LinExpr::var(v.clone()))).collect();
    let mut trans_paths = Vec::new();
    let mut out_paths = Vec::new();
    for (&id, info) in &loops {
        let c = lw.cond(info.cond, &identity);
        let base = PathState { map: identity.clone(), conds: Vec::new(), sites: BTreeSet::new() };
        let mut enter = base.clone();
        enter.conds.push(c.clone());
        let mut frames = info.cont.clone();
        frames.push(Frame::Back(id));
        frames.push(Frame::Stmts(info.body));
        let mut exit = base;
        exit.conds.push(Formula::not(c).nnf());
        for (end, st) in lw.execute(frames, enter, Segment::Trans) {
            match end {
                End::Loop(_) => trans_paths.push((id, end, st)),
                End::Exit(_) => out_paths.push((id, end, st)),
            }
        }
        for (end, st) in lw.execute(info.cont.clone(), exit, Segment::Trans) {
            match end {
                End::Loop(_) => trans_paths.push((id, end, st)),
                End::Exit(_) => out_paths.push((id, end, st)),
            }
        }
    }
    // Paths from a loop head to the exit were executed as transitions; the
    // call sites on them belong to the Out segment.
    let out_sites: BTreeSet<usize> = out_paths.iter().flat_map(|(_, _, st)| st.sites.iter().copied()).collect();
    let trans_sites: BTreeSet<usize> = trans_paths.iter().flat_map(|(_, _, st)| st.sites.iter().copied()).collect();
    for ph in lw.placeholders.values_mut() {
        if ph.segments.remove(&Segment::Trans) {
            if trans_sites.contains(&ph.site) {
                ph.segments.insert(Segment::Trans);
            }
            if out_sites.contains(&ph.site) {
                ph.segments.insert(Segment::Out);
            }
        }
    }
    {
        let mut t: Vec<(End, PathState)> = trans_paths.iter().map(|(_, e, s)| (clone_end(e), s.clone())).collect();
        lw.mark_bypass(&mut t, Segment::Trans);
        for (slot, (_, st)) in trans_paths.iter_mut().zip(t) {
            slot.2 = st;
        }
        let mut o: Vec<(End, PathState)> = out_paths.iter().map(|(_, e, s)| (clone_end(e), s.clone())).collect();
        lw.mark_bypass(&mut o, Segment::Out);
        for (slot, (_, st)) in out_paths.iter_mut().zip(o) {
            slot.2 = st;
        }
    }

    let has_done = init_paths.iter().any(|(e, _)| matches!(e, End::Exit(_)));
    let location_count = loops.len() + usize::from(has_done);
    let pc = (location_count > 1).then(|| Var::new("pc").tagged(""));
    let pc_is = |v: &Var, loc: usize| Formula::eq(&LinExpr::var(v.clone()), &LinExpr::int(loc as i64));

    let mut state_vars = Vec::new();
    state_vars.extend(pc.clone());
    state_vars.extend(vars.iter().cloned());
    state_vars.extend(ghosts.iter().cloned());

    let post = |st: &PathState, primed: bool| -> Vec<Formula> {
        vars.iter()
            .chain(&ghosts)
            .map(|v| {
                let target = if primed { v.primed() } else { v.clone() };
                Formula::eq(&LinExpr::var(target), &st.map[v])
            })
            .collect()
    };

    let init = Formula::or(
        init_paths
            .iter()
            .map(|(end, st)| {
                let loc = match end {
                    End::Loop(id) => *id,
                    End::Exit(_) => 0,
                };
                let mut parts = st.conds.clone();
                parts.extend(post(st, false));
                if let Some(pc) = &pc {
                    parts.push(pc_is(pc, loc));
                }
                Formula::and(parts)
            })
            .collect::<Vec<_>>(),
    );

    let trans = Formula::or(
        trans_paths
            .iter()
            .map(|(from, end, st)| {
                let End::Loop(to) = end else { unreachable!() };
                let mut parts = Vec::new();
                if let Some(pc) = &pc {
                    parts.push(pc_is(pc, *from));
                }
                parts.extend(st.conds.clone());
                parts.extend(post(st, true));
                if let Some(pc) = &pc {
                    parts.push(pc_is(&pc.primed(), *to));
                }
                Formula::and(parts)
            })
            .collect::<Vec<_>>(),
    );

    let ret_eqs = |vals: &[LinExpr]| -> Vec<Formula> {
        output_vars.iter().zip(vals).map(|(o, v)| Formula::eq(&LinExpr::var(o.clone()), v)).collect()
    };
    let mut out_disjuncts: Vec<Formula> = out_paths
        .iter()
        .map(|(from, end, st)| {
            let End::Exit(vals) = end else { unreachable!() };
            let mut parts = Vec::new();
            if let Some(pc) = &pc {
                parts.push(pc_is(pc, *from));
            }
            parts.extend(st.conds.clone());
            parts.extend(ret_eqs(vals));
            Formula::and(parts)
        })
        .collect();
    if has_done {
        let mut parts = Vec::new();
        if let Some(pc) = &pc {
            parts.push(pc_is(pc, 0));
        }
        parts.extend(ret_eqs(&ret_exprs));
        out_disjuncts.push(Formula::and(parts));
    }
    let out = Formula::or(out_disjuncts);

    Ok(Iots {
        procedure: p.name.clone(),
        input_vars,
        output_vars,
        state_vars,
        ghost_inputs: ghosts,
        init,
        trans,
        out,
        placeholders: lw.placeholders.into_values().collect(),
        pc,
        locations: (usize::from(!has_done)..=loops.len()).map(|l| l as i64).collect(),
    })
}

fn clone_end(e: &End) -> End {
    match e {
        End::Loop(id) => End::Loop(*id),
        End::Exit(v) => End::Exit(v.clone()),
    }
}
