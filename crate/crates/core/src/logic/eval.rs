use std::collections::BTreeMap;

use thiserror::Error;

use super::{Formula, LinExpr, PredicateSymbol, Scalar, Sym, Var};

/// Assignment of integers to variables.
pub type Valuation<S> = BTreeMap<Var, S>;

/// A concrete predicate `lambda params. body`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lambda<S> {
    pub params: Vec<Var>,
    pub body: Formula<S>,
}

impl<S: Scalar> Lambda<S> {
    pub fn new(params: Vec<Var>, body: Formula<S>) -> Self {
        Lambda { params, body }
    }

    pub fn constant(arity: usize, value: bool) -> Self {
        Lambda { params: (0..arity).map(|i| Var::new(format!("a{i}"))).collect(), body: Formula::bool(value) }
    }

    /// Body with parameters replaced by `args`.
    pub fn apply(&self, args: &[LinExpr<S>]) -> Formula<S> {
        let map: BTreeMap<Var, LinExpr<S>> = self.params.iter().cloned().zip(args.iter().cloned()).collect();
        self.body.substitute(&map)
    }
}

/// Concrete meaning for predicate symbols.
pub type Interpretation<S> = BTreeMap<Sym, Lambda<S>>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("no value bound for variable `{0}`")]
    MissingBinding(Var),
    #[error("no interpretation for predicate `{0}`")]
    MissingPredicate(String),
    #[error("predicate `{name}` applied to {got} arguments, expected {expected}")]
    Arity { name: String, expected: usize, got: usize },
}

fn lin_value<S: Scalar>(e: &LinExpr<S>, v: &Valuation<S>) -> Result<S, EvalError> {
    e.eval(|x| v.get(x).cloned()).map_err(EvalError::MissingBinding)
}

/// Two-valued ground evaluation over the integers.
pub fn evaluate<S: Scalar>(f: &Formula<S>, v: &Valuation<S>, interp: &Interpretation<S>) -> Result<bool, EvalError> {
    Ok(match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom(a) => a.holds_for(&lin_value(&a.expr, v)?),
        Formula::Not(g) => !evaluate(g, v, interp)?,
        Formula::And(gs) => {
            for g in gs {
                if !evaluate(g, v, interp)? {
                    return Ok(false);
                }
            }
            true
        }
        Formula::Or(gs) => {
            for g in gs {
                if evaluate(g, v, interp)? {
                    return Ok(true);
                }
            }
            false
        }
        Formula::Implies(a, b) => !evaluate(a, v, interp)? || evaluate(b, v, interp)?,
        Formula::App(app) => {
            let lam = interp.get(&app.symbol).ok_or_else(|| EvalError::MissingPredicate(app.symbol.name()))?;
            if lam.params.len() != app.args.len() {
                return Err(EvalError::Arity {
                    name: app.symbol.name(),
                    expected: lam.params.len(),
                    got: app.args.len(),
                });
            }
            let mut inner = Valuation::new();
            for (p, a) in lam.params.iter().zip(&app.args) {
                inner.insert(p.clone(), lin_value(a, v)?);
            }
            evaluate(&lam.body, &inner, interp)?
        }
    })
}

/// Replaces every interpreted application by the lambda body.
pub fn expand_apps<S: Scalar>(f: &Formula<S>, interp: &Interpretation<S>) -> Formula<S> {
    f.replace_apps(&mut |app| interp.get(&app.symbol).map(|lam| lam.apply(&app.args)))
}

/// Looks up a symbol by key in an interpretation.
pub fn lookup<'a, S>(interp: &'a Interpretation<S>, sym: &PredicateSymbol) -> Option<&'a Lambda<S>> {
    interp.iter().find(|(k, _)| k.as_ref() == sym).map(|(_, v)| v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{PredKind, PredicateSymbol};

    type F = Formula<i64>;
    type E = LinExpr<i64>;

    fn val(pairs: &[(&str, i64)]) -> Valuation<i64> {
        pairs.iter().map(|(k, v)| (Var::new(k), *v)).collect()
    }

    fn countdown_step() -> F {
        F::and([F::gt(&E::var("x"), &E::int(0)), F::eq(&E::var("x'"), &E::var("x").minus(&E::int(1)))])
    }

    #[test]
    fn countdown_step_evaluates() {
        let none = Interpretation::new();
        assert!(evaluate(&countdown_step(), &val(&[("x", 2), ("x'", 1)]), &none).unwrap());
        assert!(!evaluate(&countdown_step(), &val(&[("x", 0), ("x'", -1)]), &none).unwrap());
    }

    #[test]
    fn applications_use_interpretation() {
        let inv = PredicateSymbol::new(PredKind::Inv, "main", vec!["x".into()]).into_sym();
        let f = F::app(inv.clone(), vec![E::var("x")]);
        let mut interp = Interpretation::new();
        interp.insert(inv, Lambda::new(vec![Var::new("p")], F::ge(&E::var("p"), &E::int(0))));
        assert!(evaluate(&f, &val(&[("x", 5)]), &interp).unwrap());
        assert!(!evaluate(&f, &val(&[("x", -5)]), &interp).unwrap());
        let expanded = expand_apps(&f, &interp);
        assert_eq!(expanded, F::ge(&E::var("x"), &E::int(0)));
    }

    #[test]
    fn missing_binding_is_reported() {
        let err = evaluate(&countdown_step(), &val(&[("x", 2)]), &Interpretation::new()).unwrap_err();
        assert_eq!(err, EvalError::MissingBinding(Var::new("x'")));
        let inv = PredicateSymbol::new(PredKind::Inv, "main", vec!["x".into()]).into_sym();
        let f = F::app(inv, vec![E::var("x")]);
        assert!(matches!(evaluate(&f, &val(&[("x", 1)]), &Interpretation::new()), Err(EvalError::MissingPredicate(_))));
    }
}
