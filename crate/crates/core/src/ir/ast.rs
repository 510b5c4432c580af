use std::collections::BTreeSet;

use crate::LinExpr;

/// Source position, 1-based.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl std::fmt::Display for Pos {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn token(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }
}

/// Branch and loop conditions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Cond {
    True,
    False,
    /// Nondeterministic choice, written `*`.
    Nondet,
    Cmp(LinExpr, CmpOp, LinExpr),
    Not(Box<Cond>),
    And(Vec<Cond>),
    Or(Vec<Cond>),
}

impl Cond {
    pub fn vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Cond::True | Cond::False | Cond::Nondet => {}
            Cond::Cmp(a, _, b) => {
                out.extend(a.vars().map(|v| v.name().to_string()));
                out.extend(b.vars().map(|v| v.name().to_string()));
            }
            Cond::Not(c) => c.vars(out),
            Cond::And(cs) | Cond::Or(cs) => cs.iter().for_each(|c| c.vars(out)),
        }
    }

    pub fn has_nondet(&self) -> bool {
        match self {
            Cond::Nondet => true,
            Cond::Not(c) => c.has_nondet(),
            Cond::And(cs) | Cond::Or(cs) => cs.iter().any(Cond::has_nondet),
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Stmt {
    Assign { var: String, expr: LinExpr },
    If { cond: Cond, then: Vec<Stmt>, els: Vec<Stmt> },
    While { id: usize, cond: Cond, body: Vec<Stmt> },
    Call { site: usize, results: Vec<String>, callee: String, args: Vec<LinExpr> },
    Return(Vec<LinExpr>),
}

/// A call site `results = call callee(args)` at index `id` in its caller.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CallSite {
    pub id: usize,
    pub callee: String,
    pub args: Vec<LinExpr>,
    pub results: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Procedure {
    pub name: String,
    pub params: Vec<String>,
    /// Number of values returned.
    pub returns: usize,
    pub body: Vec<Stmt>,
    pub call_sites: Vec<CallSite>,
    pub pos: Pos,
}

impl Procedure {
    /// Parameters followed by locals in order of first assignment.
    pub fn variables(&self) -> Vec<String> {
        let mut out = self.params.clone();
        fn walk(stmts: &[Stmt], out: &mut Vec<String>) {
            for s in stmts {
                match s {
                    Stmt::Assign { var, .. } => push_unique(out, var),
                    Stmt::Call { results, .. } => results.iter().for_each(|r| push_unique(out, r)),
                    Stmt::If { then, els, .. } => {
                        walk(then, out);
                        walk(els, out);
                    }
                    Stmt::While { body, .. } => walk(body, out),
                    Stmt::Return(_) => {}
                }
            }
        }
        walk(&self.body, &mut out);
        out
    }

    pub fn loop_count(&self) -> usize {
        fn count(stmts: &[Stmt]) -> usize {
            stmts
                .iter()
                .map(|s| match s {
                    Stmt::While { body, .. } => 1 + count(body),
                    Stmt::If { then, els, .. } => count(then) + count(els),
                    _ => 0,
                })
                .sum()
        }
        count(&self.body)
    }

    pub fn site(&self, id: usize) -> Option<&CallSite> {
        self.call_sites.iter().find(|s| s.id == id)
    }

    /// Recomputes call-site records and renumbers loops and sites in pre-order.
    pub fn renumber(&mut self) {
        let mut loops = 0;
        let mut sites = Vec::new();
        fn walk(stmts: &mut [Stmt], loops: &mut usize, sites: &mut Vec<CallSite>) {
            for s in stmts {
                match s {
                    Stmt::While { id, body, .. } => {
                        *loops += 1;
                        *id = *loops;
                        walk(body, loops, sites);
                    }
                    Stmt::If { then, els, .. } => {
                        walk(then, loops, sites);
                        walk(els, loops, sites);
                    }
                    Stmt::Call { site, results, callee, args } => {
                        *site = sites.len() + 1;
                        sites.push(CallSite {
                            id: *site,
                            callee: callee.clone(),
                            args: args.clone(),
                            results: results.clone(),
                        });
                    }
                    _ => {}
                }
            }
        }
        walk(&mut self.body, &mut loops, &mut sites);
        self.call_sites = sites;
    }
}

fn push_unique(out: &mut Vec<String>, v: &str) {
    if !out.iter().any(|x| x == v) {
        out.push(v.to_string());
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub procedures: Vec<Procedure>,
    pub entry: String,
}

impl Program {
    pub fn procedure(&self, name: &str) -> Option<&Procedure> {
        self.procedures.iter().find(|p| p.name == name)
    }

    pub fn procedure_mut(&mut self, name: &str) -> Option<&mut Procedure> {
        self.procedures.iter_mut().find(|p| p.name == name)
    }

    pub fn call_site_count(&self) -> usize {
        self.procedures.iter().map(|p| p.call_sites.len()).sum()
    }

    /// Structural equality ignoring source positions.
    pub fn same_structure(&self, other: &Program) -> bool {
        self.entry == other.entry
            && self.procedures.len() == other.procedures.len()
            && self.procedures.iter().zip(&other.procedures).all(|(a, b)| {
                a.name == b.name
                    && a.params == b.params
                    && a.returns == b.returns
                    && a.body == b.body
                    && a.call_sites == b.call_sites
            })
    }
}
