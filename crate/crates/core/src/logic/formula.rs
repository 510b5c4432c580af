use std::collections::{BTreeMap, BTreeSet};

use super::{LinExpr, Scalar, Sym, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rel {
    Le,
    Lt,
    Eq,
}

/// Linear atom `expr rel 0`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom<S> {
    pub expr: LinExpr<S>,
    pub rel: Rel,
}

impl<S: Scalar> Atom<S> {
    pub fn holds_for(&self, value: &S) -> bool {
        match self.rel {
            Rel::Le => !value.is_positive(),
            Rel::Lt => value.is_negative(),
            Rel::Eq => value.is_zero(),
        }
    }
}

/// Application of a predicate symbol to argument terms.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PredApp<S> {
    pub symbol: Sym,
    pub args: Vec<LinExpr<S>>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula<S> {
    True,
    False,
    Atom(Atom<S>),
    Not(Box<Formula<S>>),
    And(Vec<Formula<S>>),
    Or(Vec<Formula<S>>),
    Implies(Box<Formula<S>>, Box<Formula<S>>),
    App(PredApp<S>),
}

impl<S: Scalar> Formula<S> {
    pub fn atom(expr: LinExpr<S>, rel: Rel) -> Self {
        Formula::Atom(Atom { expr, rel })
    }

    /// `a <= b`
    pub fn le(a: &LinExpr<S>, b: &LinExpr<S>) -> Self {
        Self::atom(a.minus(b), Rel::Le)
    }

    /// `a < b`
    pub fn lt(a: &LinExpr<S>, b: &LinExpr<S>) -> Self {
        Self::atom(a.minus(b), Rel::Lt)
    }

    pub fn ge(a: &LinExpr<S>, b: &LinExpr<S>) -> Self {
        Self::le(b, a)
    }

    pub fn gt(a: &LinExpr<S>, b: &LinExpr<S>) -> Self {
        Self::lt(b, a)
    }

    pub fn eq(a: &LinExpr<S>, b: &LinExpr<S>) -> Self {
        Self::atom(a.minus(b), Rel::Eq)
    }

    pub fn app(symbol: Sym, args: Vec<LinExpr<S>>) -> Self {
        debug_assert_eq!(symbol.arity, args.len(), "arity of {}", symbol.name());
        Formula::App(PredApp { symbol, args })
    }

    pub fn bool(b: bool) -> Self {
        if b {
            Formula::True
        } else {
            Formula::False
        }
    }

    /// Conjunction with unit/zero simplification and flattening.
    pub fn and(parts: impl IntoIterator<Item = Formula<S>>) -> Self {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::True => {}
                Formula::False => return Formula::False,
                Formula::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::True,
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }

    pub fn or(parts: impl IntoIterator<Item = Formula<S>>) -> Self {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Formula::False => {}
                Formula::True => return Formula::True,
                Formula::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::False,
            1 => out.pop().unwrap(),
            _ => Formula::Or(out),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula<S>) -> Self {
        match f {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Not(inner) => *inner,
            other => Formula::Not(Box::new(other)),
        }
    }

    pub fn implies(a: Formula<S>, b: Formula<S>) -> Self {
        match (&a, &b) {
            (Formula::False, _) | (_, Formula::True) => Formula::True,
            (Formula::True, _) => b,
            _ => Formula::Implies(Box::new(a), Box::new(b)),
        }
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Formula::True)
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Formula::False)
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => out.extend(a.expr.vars().cloned()),
            Formula::Not(f) => f.collect_vars(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_vars(out)),
            Formula::Implies(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Formula::App(app) => {
                for arg in &app.args {
                    out.extend(arg.vars().cloned());
                }
            }
        }
    }

    /// Every predicate application, in traversal order.
    pub fn apps(&self) -> Vec<&PredApp<S>> {
        let mut out = Vec::new();
        self.visit_apps(&mut |a| out.push(a));
        out
    }

    pub fn symbols(&self) -> BTreeSet<Sym> {
        self.apps().into_iter().map(|a| a.symbol.clone()).collect()
    }

    fn visit_apps<'a>(&'a self, f: &mut impl FnMut(&'a PredApp<S>)) {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => {}
            Formula::Not(g) => g.visit_apps(f),
            Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| g.visit_apps(f)),
            Formula::Implies(a, b) => {
                a.visit_apps(f);
                b.visit_apps(f);
            }
            Formula::App(app) => f(app),
        }
    }

    /// Capture-free replacement of free variables; applies to predicate arguments too.
    pub fn substitute(&self, map: &BTreeMap<Var, LinExpr<S>>) -> Self {
        self.map_atoms(
            &mut |atom| Formula::Atom(Atom { expr: atom.expr.substitute(map), rel: atom.rel }).fold_constant(),
            &mut |app| {
                Formula::App(PredApp {
                    symbol: app.symbol.clone(),
                    args: app.args.iter().map(|a| a.substitute(map)).collect(),
                })
            },
        )
    }

    /// Renames variables.
    pub fn rename(&self, map: &BTreeMap<Var, Var>) -> Self {
        let m: BTreeMap<Var, LinExpr<S>> = map.iter().map(|(k, v)| (k.clone(), LinExpr::var(v.clone()))).collect();
        self.substitute(&m)
    }

    /// Rebuilds the formula bottom-up, replacing atoms and applications.
    pub fn map_atoms(
        &self,
        on_atom: &mut impl FnMut(&Atom<S>) -> Formula<S>,
        on_app: &mut impl FnMut(&PredApp<S>) -> Formula<S>,
    ) -> Self {
        match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Atom(a) => on_atom(a),
            Formula::Not(f) => Formula::not(f.map_atoms(on_atom, on_app)),
            Formula::And(fs) => Formula::and(fs.iter().map(|f| f.map_atoms(on_atom, on_app)).collect::<Vec<_>>()),
            Formula::Or(fs) => Formula::or(fs.iter().map(|f| f.map_atoms(on_atom, on_app)).collect::<Vec<_>>()),
            Formula::Implies(a, b) => Formula::implies(a.map_atoms(on_atom, on_app), b.map_atoms(on_atom, on_app)),
            Formula::App(app) => on_app(app),
        }
    }

    /// Replaces applications via `f`; returning `None` keeps the application.
    pub fn replace_apps(&self, f: &mut impl FnMut(&PredApp<S>) -> Option<Formula<S>>) -> Self {
        self.map_atoms(&mut |a| Formula::Atom(a.clone()), &mut |app| {
            f(app).unwrap_or_else(|| Formula::App(app.clone()))
        })
    }

    fn fold_constant(self) -> Self {
        if let Formula::Atom(a) = &self {
            if let Some(c) = a.expr.as_constant() {
                return Formula::bool(a.holds_for(c));
            }
        }
        self
    }

    /// Constant folding and flattening; no semantic change.
    pub fn simplify(&self) -> Self {
        self.map_atoms(&mut |a| Formula::Atom(a.clone()).fold_constant(), &mut |app| Formula::App(app.clone()))
    }

    /// Negation normal form: negation only on predicate applications,
    /// implications eliminated, negated atoms rewritten into positive atoms.
    pub fn nnf(&self) -> Self {
        self.nnf_polar(true)
    }

    fn nnf_polar(&self, positive: bool) -> Self {
        match self {
            Formula::True => Formula::bool(positive),
            Formula::False => Formula::bool(!positive),
            Formula::Atom(a) => {
                if positive {
                    Formula::Atom(a.clone()).fold_constant()
                } else {
                    negate_atom(a)
                }
            }
            Formula::Not(f) => f.nnf_polar(!positive),
            Formula::And(fs) => {
                let parts = fs.iter().map(|f| f.nnf_polar(positive)).collect::<Vec<_>>();
                if positive {
                    Formula::and(parts)
                } else {
                    Formula::or(parts)
                }
            }
            Formula::Or(fs) => {
                let parts = fs.iter().map(|f| f.nnf_polar(positive)).collect::<Vec<_>>();
                if positive {
                    Formula::or(parts)
                } else {
                    Formula::and(parts)
                }
            }
            Formula::Implies(a, b) => {
                if positive {
                    Formula::or([a.nnf_polar(false), b.nnf_polar(true)])
                } else {
                    Formula::and([a.nnf_polar(true), b.nnf_polar(false)])
                }
            }
            Formula::App(app) => {
                if positive {
                    Formula::App(app.clone())
                } else {
                    Formula::Not(Box::new(Formula::App(app.clone())))
                }
            }
        }
    }

    pub fn try_map_scalar<T: Scalar>(&self) -> Option<Formula<T>> {
        Some(match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Atom(a) => Formula::Atom(Atom { expr: a.expr.try_map_scalar()?, rel: a.rel }),
            Formula::Not(f) => Formula::Not(Box::new(f.try_map_scalar()?)),
            Formula::And(fs) => Formula::And(fs.iter().map(|f| f.try_map_scalar()).collect::<Option<Vec<_>>>()?),
            Formula::Or(fs) => Formula::Or(fs.iter().map(|f| f.try_map_scalar()).collect::<Option<Vec<_>>>()?),
            Formula::Implies(a, b) => Formula::Implies(Box::new(a.try_map_scalar()?), Box::new(b.try_map_scalar()?)),
            Formula::App(app) => Formula::App(PredApp {
                symbol: app.symbol.clone(),
                args: app.args.iter().map(|a| a.try_map_scalar()).collect::<Option<Vec<_>>>()?,
            }),
        })
    }

    /// Number of nodes, for diagnostics.
    pub fn size(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) | Formula::App(_) => 1,
            Formula::Not(f) => 1 + f.size(),
            Formula::And(fs) | Formula::Or(fs) => 1 + fs.iter().map(|f| f.size()).sum::<usize>(),
            Formula::Implies(a, b) => 1 + a.size() + b.size(),
        }
    }
}

fn negate_atom<S: Scalar>(a: &Atom<S>) -> Formula<S> {
    let folded = Formula::Atom(a.clone()).fold_constant();
    if !matches!(folded, Formula::Atom(_)) {
        return Formula::not(folded);
    }
    match a.rel {
        // not (e <= 0)  <=>  -e < 0
        Rel::Le => Formula::atom(a.expr.neg(), Rel::Lt),
        // not (e < 0)  <=>  -e <= 0
        Rel::Lt => Formula::atom(a.expr.neg(), Rel::Le),
        Rel::Eq => Formula::or([Formula::atom(a.expr.clone(), Rel::Lt), Formula::atom(a.expr.neg(), Rel::Lt)]),
    }
}
