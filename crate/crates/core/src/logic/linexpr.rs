use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::Scalar;

/// A program or logic variable. Cheap to clone.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(Arc<str>);

impl Var {
    pub fn new(name: impl AsRef<str>) -> Self {
        Var(Arc::from(name.as_ref()))
    }

    pub fn name(&self) -> &str {
        &self.0
    }

    /// Primed copy used for post-states.
    pub fn primed(&self) -> Var {
        Var::new(format!("{}'", self.0))
    }

    /// Variable with a suffix appended after the reserved `!` marker.
    pub fn tagged(&self, tag: impl fmt::Display) -> Var {
        Var::new(format!("{}!{}", self.0, tag))
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<&str> for Var {
    fn from(s: &str) -> Self {
        Var::new(s)
    }
}

/// `sum(coeff * var) + constant`, with no zero coefficients stored.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct LinExpr<S> {
    terms: BTreeMap<Var, S>,
    constant: S,
}

impl<S: Scalar> LinExpr<S> {
    pub fn zero() -> Self {
        LinExpr { terms: BTreeMap::new(), constant: S::zero() }
    }

    pub fn constant(c: S) -> Self {
        LinExpr { terms: BTreeMap::new(), constant: c }
    }

    pub fn int(c: i64) -> Self {
        Self::constant(S::from_i64(c).expect("scalar holds i64"))
    }

    pub fn var(v: impl Into<Var>) -> Self {
        Self::term(S::one(), v.into())
    }

    pub fn term(coeff: S, v: Var) -> Self {
        let mut e = Self::zero();
        e.add_term(coeff, v);
        e
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Var, &S)> {
        self.terms.iter()
    }

    pub fn coeff(&self, v: &Var) -> S {
        self.terms.get(v).cloned().unwrap_or_else(S::zero)
    }

    pub fn constant_part(&self) -> &S {
        &self.constant
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn as_constant(&self) -> Option<&S> {
        self.terms.is_empty().then_some(&self.constant)
    }

    pub fn as_var(&self) -> Option<&Var> {
        if self.terms.len() == 1 && self.constant.is_zero() {
            let (v, c) = self.terms.iter().next()?;
            return c.is_one().then_some(v);
        }
        None
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.terms.keys()
    }

    pub fn add_term(&mut self, coeff: S, v: Var) {
        if coeff.is_zero() {
            return;
        }
        let entry = self.terms.entry(v).or_insert_with(S::zero);
        *entry = entry.clone() + coeff;
        if entry.is_zero() {
            self.terms.retain(|_, c| !c.is_zero());
        }
    }

    pub fn add_constant(&mut self, c: S) {
        self.constant = self.constant.clone() + c;
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (v, c) in &other.terms {
            out.add_term(c.clone(), v.clone());
        }
        out.add_constant(other.constant.clone());
        out
    }

    pub fn scale(&self, k: &S) -> Self {
        if k.is_zero() {
            return Self::zero();
        }
        LinExpr {
            terms: self.terms.iter().map(|(v, c)| (v.clone(), c.clone() * k.clone())).collect(),
            constant: self.constant.clone() * k.clone(),
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(&-S::one())
    }

    pub fn minus(&self, other: &Self) -> Self {
        self.plus(&other.neg())
    }

    /// Replaces variables by expressions; unmapped variables stay.
    pub fn substitute(&self, map: &BTreeMap<Var, LinExpr<S>>) -> Self {
        let mut out = LinExpr::constant(self.constant.clone());
        for (v, c) in &self.terms {
            match map.get(v) {
                Some(e) => out = out.plus(&e.scale(c)),
                None => out.add_term(c.clone(), v.clone()),
            }
        }
        out
    }

    pub fn eval(&self, lookup: impl Fn(&Var) -> Option<S>) -> Result<S, Var> {
        let mut acc = self.constant.clone();
        for (v, c) in &self.terms {
            let val = lookup(v).ok_or_else(|| v.clone())?;
            acc = acc + c.clone() * val;
        }
        Ok(acc)
    }

    pub fn try_map_scalar<T: Scalar>(&self) -> Option<LinExpr<T>> {
        let mut terms = BTreeMap::new();
        for (v, c) in &self.terms {
            terms.insert(v.clone(), c.convert::<T>()?);
        }
        Some(LinExpr { terms, constant: self.constant.convert::<T>()? })
    }
}

impl<S: Scalar> fmt::Display for LinExpr<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, c) in &self.terms {
            let neg = c.is_negative();
            let abs = c.abs();
            match (first, neg) {
                (true, true) => write!(f, "-")?,
                (false, true) => write!(f, " - ")?,
                (false, false) => write!(f, " + ")?,
                (true, false) => {}
            }
            if abs.is_one() {
                write!(f, "{v}")?;
            } else {
                write!(f, "{abs}*{v}")?;
            }
            first = false;
        }
        if first {
            write!(f, "{}", self.constant)
        } else if self.constant.is_negative() {
            write!(f, " - {}", self.constant.abs())
        } else if !self.constant.is_zero() {
            write!(f, " + {}", self.constant)
        } else {
            Ok(())
        }
    }
}
