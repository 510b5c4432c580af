use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::Serialize;

/// Role of a second-order unknown.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum PredKind {
    Inv,
    RR,
    Summary,
    Sum,
    CallCtx,
    Precond,
    /// Ranking over procedure inputs that must decrease along recursive calls.
    RecRank,
}

impl PredKind {
    pub fn is_ranking(self) -> bool {
        matches!(self, PredKind::RR | PredKind::RecRank)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Polarity {
    Over,
    Under,
}

/// Call site reference: caller procedure and the site index inside it.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SiteRef {
    pub caller: String,
    pub index: usize,
}

/// A second-order unknown.
///
/// Identity is the key `(kind, owner, site, polarity)`; arity and roles are
/// descriptive and must agree for equal keys.
#[derive(Clone, Debug, Serialize)]
pub struct PredicateSymbol {
    pub kind: PredKind,
    pub owner: String,
    pub site: Option<SiteRef>,
    pub polarity: Polarity,
    pub arity: usize,
    /// Human-readable name for each argument position.
    pub roles: Vec<String>,
}

pub type Sym = Arc<PredicateSymbol>;

impl PredicateSymbol {
    pub fn new(kind: PredKind, owner: impl Into<String>, roles: Vec<String>) -> Self {
        PredicateSymbol { kind, owner: owner.into(), site: None, polarity: Polarity::Over, arity: roles.len(), roles }
    }

    pub fn at_site(mut self, caller: impl Into<String>, index: usize) -> Self {
        self.site = Some(SiteRef { caller: caller.into(), index });
        self
    }

    pub fn with_polarity(mut self, polarity: Polarity) -> Self {
        self.polarity = polarity;
        self
    }

    pub fn into_sym(self) -> Sym {
        Arc::new(self)
    }

    fn key(&self) -> (PredKind, &str, Option<&SiteRef>, Polarity) {
        (self.kind, &self.owner, self.site.as_ref(), self.polarity)
    }

    /// Identifier usable as an SMT-LIB2 symbol.
    pub fn name(&self) -> String {
        let kind = format!("{:?}", self.kind);
        let mut s = format!("{kind}_{}", self.owner);
        if let Some(site) = &self.site {
            s.push_str(&format!("@{}.{}", site.caller, site.index));
        }
        if self.polarity == Polarity::Under {
            s.push_str("^u");
        }
        s
    }
}

impl PartialEq for PredicateSymbol {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for PredicateSymbol {}

impl Hash for PredicateSymbol {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state)
    }
}

impl PartialOrd for PredicateSymbol {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PredicateSymbol {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl fmt::Display for PredicateSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_ignores_roles() {
        let a = PredicateSymbol::new(PredKind::Inv, "f", vec!["x".into()]);
        let b = PredicateSymbol::new(PredKind::Inv, "f", vec!["y".into()]);
        assert_eq!(a, b);
        let c = a.clone().with_polarity(Polarity::Under);
        assert_ne!(a, c);
    }

    #[test]
    fn names_distinguish_sites() {
        let s = PredicateSymbol::new(PredKind::CallCtx, "g", vec![]).at_site("main", 1);
        assert_eq!(s.name(), "CallCtx_g@main.1");
    }
}
