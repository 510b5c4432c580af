//! Predicate dependency graph and solve-group scheduling.

use std::collections::{BTreeMap, BTreeSet};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::encode::ConstraintSystem;
use crate::logic::{PredKind, Sym};
use crate::synth::Objective;

/// `from` is needed to solve `to`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DepEdge {
    pub from: Sym,
    pub to: Sym,
    /// The dependency runs through a recursive call instance.
    pub unfolding: bool,
    /// Termination argument feeding back into the invariant (lazy mode only).
    pub lazy: bool,
}

#[derive(Clone, Debug, Default)]
pub struct DepGraph {
    pub nodes: Vec<Sym>,
    pub edges: Vec<DepEdge>,
}

impl DepGraph {
    /// Non-lazy predecessors of `s`.
    pub fn deps_of<'a>(&'a self, s: &'a Sym) -> impl Iterator<Item = &'a DepEdge> + 'a {
        self.edges.iter().filter(move |e| &e.to == s && !e.lazy)
    }

    pub fn has_edge(&self, from: &Sym, to: &Sym) -> bool {
        self.edges.iter().any(|e| &e.from == from && &e.to == to)
    }

    /// Strongly connected components of the non-lazy edges, dependencies first.
    pub fn components(&self) -> Vec<Vec<Sym>> {
        let index: BTreeMap<&Sym, usize> = self.nodes.iter().enumerate().map(|(i, s)| (s, i)).collect();
        let mut g = DiGraph::<usize, ()>::new();
        let ids: Vec<_> = (0..self.nodes.len()).map(|i| g.add_node(i)).collect();
        for e in self.edges.iter().filter(|e| !e.lazy) {
            g.add_edge(ids[index[&e.from]], ids[index[&e.to]], ());
        }
        let mut comps: Vec<Vec<Sym>> = tarjan_scc(&g)
            .into_iter()
            .map(|c| {
                let mut members: Vec<usize> = c.into_iter().map(|n| g[n]).collect();
                members.sort();
                members.into_iter().map(|i| self.nodes[i].clone()).collect()
            })
            .collect();
        comps.reverse();
        comps
    }

    pub fn is_acyclic(&self) -> bool {
        self.components().iter().all(|c| c.len() == 1 && !self.has_edge(&c[0], &c[0]))
    }
}

fn same_component(sys: &ConstraintSystem, a: &str, b: &str) -> bool {
    match (sys.recursion.get(a), sys.recursion.get(b)) {
        (Some(x), Some(y)) => x == y,
        _ => false,
    }
}

fn is_unfolding(sys: &ConstraintSystem, clause_owner: &str, from: &Sym, to: &Sym) -> bool {
    match from.kind {
        PredKind::Summary | PredKind::Sum => same_component(sys, clause_owner, &from.owner),
        PredKind::CallCtx => {
            to.kind == PredKind::CallCtx && to.site.as_ref().is_some_and(|s| same_component(sys, &s.caller, &to.owner))
        }
        _ => false,
    }
}

/// Edge `u → v` for every clause concluding `v` that applies `u` in its premise.
pub fn build_dep_graph(sys: &ConstraintSystem) -> DepGraph {
    build_dep_graph_with(sys, false)
}

/// As [`build_dep_graph`]; `lazy` adds the `RR → Inv` back edge of each procedure.
pub fn build_dep_graph_with(sys: &ConstraintSystem, lazy: bool) -> DepGraph {
    let nodes: Vec<Sym> = sys.symbols().into_iter().collect();
    let mut edges: BTreeMap<(Sym, Sym), (bool, bool)> = BTreeMap::new();
    for c in &sys.clauses {
        let premises = c.premises();
        for to in c.conclusions() {
            for from in &premises {
                let unfolding = is_unfolding(sys, &c.origin.procedure, from, &to);
                let e = edges.entry((from.clone(), to.clone())).or_insert((false, false));
                e.0 |= unfolding;
            }
        }
    }
    if lazy {
        for rr in nodes.iter().filter(|s| s.kind == PredKind::RR) {
            if let Some(inv) = nodes.iter().find(|s| s.kind == PredKind::Inv && s.owner == rr.owner) {
                edges.entry((rr.clone(), inv.clone())).or_insert((false, true));
            }
        }
    }
    let edges =
        edges.into_iter().map(|((from, to), (unfolding, lazy))| DepEdge { from, to, unfolding, lazy }).collect();
    DepGraph { nodes, edges }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Monolithic,
    Procedural,
    SccMin,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Monolithic => "monolithic",
            Mode::Procedural => "procedural",
            Mode::SccMin => "scc-min",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "monolithic" => Ok(Mode::Monolithic),
            "procedural" => Ok(Mode::Procedural),
            "scc-min" => Ok(Mode::SccMin),
            _ => Err(format!("unknown mode `{s}` (expected monolithic, procedural or scc-min)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Capacity {
    pub max_predicates: usize,
    pub max_params: usize,
}

impl Default for Capacity {
    fn default() -> Self {
        Capacity { max_predicates: 4, max_params: 256 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Fixpoint {
    None,
    /// Member of the greatest-fixpoint block `block`.
    Gfp {
        block: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveGroup {
    pub predicates: Vec<Sym>,
    pub objective: Objective,
    pub fixpoint: Fixpoint,
}

impl SolveGroup {
    fn new(predicates: Vec<Sym>, objective: Objective) -> Self {
        SolveGroup { predicates, objective, fixpoint: Fixpoint::None }
    }

    pub fn has_ranking(&self) -> bool {
        self.predicates.iter().any(|s| s.kind.is_ranking())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schedule {
    pub mode: Mode,
    pub groups: Vec<SolveGroup>,
}

impl Schedule {
    pub fn group_of(&self, s: &Sym) -> Option<usize> {
        self.groups.iter().position(|g| g.predicates.contains(s))
    }

    /// Every unknown in exactly one group, and every outside dependency
    /// either scheduled earlier or inside the same fixpoint block.
    pub fn is_valid_for(&self, g: &DepGraph) -> bool {
        let mut seen = BTreeSet::new();
        for grp in &self.groups {
            for s in &grp.predicates {
                if !seen.insert(s.clone()) {
                    return false;
                }
            }
        }
        if seen != g.nodes.iter().cloned().collect() {
            return false;
        }
        for (j, grp) in self.groups.iter().enumerate() {
            for s in &grp.predicates {
                for e in g.deps_of(s) {
                    let Some(i) = self.group_of(&e.from) else { return false };
                    let same_block = matches!(
                        (self.groups[i].fixpoint, grp.fixpoint),
                        (Fixpoint::Gfp { block: a }, Fixpoint::Gfp { block: b }) if a == b
                    );
                    if i > j && !same_block {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Groups whose predicates the group `j` depends on directly.
    pub fn predecessors(&self, g: &DepGraph, j: usize) -> BTreeSet<usize> {
        self.groups[j]
            .predicates
            .iter()
            .flat_map(|s| g.deps_of(s).filter_map(|e| self.group_of(&e.from)).collect::<Vec<_>>())
            .filter(|&i| i != j)
            .collect()
    }

    /// Same schedule with group `j` and everything it transitively depends
    /// on merged into one plain group, solved first.
    pub fn merged_with_predecessors(&self, g: &DepGraph, j: usize) -> Schedule {
        let mut take = BTreeSet::from([j]);
        loop {
            let mut next = take.clone();
            for &i in &take {
                next.extend(self.predecessors(g, i));
                if let Fixpoint::Gfp { block } = self.groups[i].fixpoint {
                    next.extend((0..self.groups.len()).filter(|&k| self.groups[k].fixpoint == Fixpoint::Gfp { block }));
                }
            }
            if next == take {
                break;
            }
            take = next;
        }
        let merged: Vec<Sym> = take.iter().flat_map(|&i| self.groups[i].predicates.clone()).collect();
        let mut groups = vec![SolveGroup::new(merged.clone(), objective_for(&merged))];
        groups.extend(self.groups.iter().enumerate().filter(|(i, _)| !take.contains(i)).map(|(_, grp)| grp.clone()));
        Schedule { mode: self.mode, groups }
    }
}

fn objective_for(preds: &[Sym]) -> Objective {
    if preds.iter().any(|s| s.kind.is_ranking()) {
        Objective::Any
    } else {
        Objective::Strongest
    }
}

/// Strongly connected components of the part-level graph, dependencies first.
fn part_cycles(g: &DepGraph, parts: &[Vec<Sym>]) -> Vec<Vec<usize>> {
    let owner: BTreeMap<&Sym, usize> =
        parts.iter().enumerate().flat_map(|(i, p)| p.iter().map(move |s| (s, i))).collect();
    let mut pg = DiGraph::<usize, ()>::new();
    let ids: Vec<_> = (0..parts.len()).map(|i| pg.add_node(i)).collect();
    for e in g.edges.iter().filter(|e| !e.lazy) {
        let (a, b) = (owner[&e.from], owner[&e.to]);
        if a != b {
            pg.add_edge(ids[a], ids[b], ());
        }
    }
    let mut comps: Vec<Vec<usize>> = tarjan_scc(&pg)
        .into_iter()
        .map(|c| {
            let mut m: Vec<usize> = c.into_iter().map(|n| pg[n]).collect();
            m.sort();
            m
        })
        .collect();
    comps.reverse();
    comps
}

fn kind_class(k: PredKind) -> usize {
    match k {
        PredKind::CallCtx => 0,
        PredKind::RR | PredKind::RecRank => 2,
        _ => 1,
    }
}

/// Splits `preds` into chunks within capacity; a single predicate may exceed it.
fn chunk(preds: &[Sym], cap: Capacity, weight: &dyn Fn(&Sym) -> usize) -> Vec<Vec<Sym>> {
    let mut out: Vec<Vec<Sym>> = Vec::new();
    let mut cur: Vec<Sym> = Vec::new();
    let mut w = 0;
    for s in preds {
        let ws = weight(s);
        if !cur.is_empty() && (cur.len() + 1 > cap.max_predicates || w + ws > cap.max_params) {
            out.push(std::mem::take(&mut cur));
            w = 0;
        }
        cur.push(s.clone());
        w += ws;
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn fits(preds: usize, params: usize, cap: Capacity) -> bool {
    preds <= cap.max_predicates && params <= cap.max_params
}

/// Schedule without a parameter-count limit.
pub fn schedule(g: &DepGraph, cap: Capacity, mode: Mode) -> Schedule {
    schedule_weighted(g, cap, mode, &|_| 0)
}

/// Groups the unknowns of `g` for `mode`; `weight` counts template parameters.
pub fn schedule_weighted(g: &DepGraph, cap: Capacity, mode: Mode, weight: &dyn Fn(&Sym) -> usize) -> Schedule {
    if mode == Mode::Monolithic {
        let groups =
            if g.nodes.is_empty() { Vec::new() } else { vec![SolveGroup::new(g.nodes.clone(), Objective::Any)] };
        return Schedule { mode, groups };
    }
    let base: Vec<Vec<Sym>> = match mode {
        Mode::Procedural => {
            let mut classes: BTreeMap<(String, usize), Vec<Sym>> = BTreeMap::new();
            for s in &g.nodes {
                classes.entry((s.owner.clone(), kind_class(s.kind))).or_default().push(s.clone());
            }
            classes.into_values().collect()
        }
        _ => g.components(),
    };
    // A recursive class is resolved from above in procedural mode.
    let recursive_class = |p: &[Sym]| {
        mode == Mode::Procedural && g.edges.iter().any(|e| e.unfolding && p.contains(&e.from) && p.contains(&e.to))
    };
    let mut parts: Vec<(Vec<Sym>, bool)> = Vec::new();
    for p in base {
        let total: usize = p.iter().map(weight).sum();
        let rec = recursive_class(&p);
        if fits(p.len(), total, cap) {
            parts.push((p, rec));
        } else {
            let chunks = chunk(&p, cap, weight);
            let cyclic = chunks.len() > 1 && !p.iter().any(|s| s.kind.is_ranking());
            for c in chunks {
                parts.push((c, rec || cyclic));
            }
        }
    }
    let plain: Vec<Vec<Sym>> = parts.iter().map(|(p, _)| p.clone()).collect();
    let comps = part_cycles(g, &plain);
    let mut groups = Vec::new();
    let mut block = 0;
    for comp in comps {
        let members: Vec<Sym> = comp.iter().flat_map(|&i| plain[i].clone()).collect();
        let total: usize = members.iter().map(weight).sum();
        let any_rec = comp.iter().any(|&i| parts[i].1);
        if comp.len() > 1 && fits(members.len(), total, cap) && !any_rec {
            groups.push(SolveGroup::new(members.clone(), objective_for(&members)));
        } else if comp.len() > 1 || any_rec {
            for &i in &comp {
                let mut grp = SolveGroup::new(plain[i].clone(), objective_for(&plain[i]));
                grp.fixpoint = Fixpoint::Gfp { block };
                groups.push(grp);
            }
            block += 1;
        } else {
            groups.push(SolveGroup::new(plain[comp[0]].clone(), objective_for(&plain[comp[0]])));
        }
    }
    Schedule { mode, groups }
}
