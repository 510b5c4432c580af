//! First-order formula kernel over linear integer arithmetic.
//!
//! Everything here is generic over the coefficient type; the analysis uses
//! arbitrary-precision integers through the aliases at the crate root.

mod eval;
mod formula;
mod linexpr;
mod scalar;
pub mod smt;
mod symbol;

pub use eval::{evaluate, expand_apps, lookup, EvalError, Interpretation, Lambda, Valuation};
pub use formula::{Atom, Formula, PredApp, Rel};
pub use linexpr::{LinExpr, Var};
pub use scalar::Scalar;
pub use symbol::{Polarity, PredKind, PredicateSymbol, SiteRef, Sym};

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use proptest::prelude::*;

    use super::*;

    type F = Formula<i64>;
    type E = LinExpr<i64>;

    fn arb_atom() -> impl Strategy<Value = F> {
        (-2i64..=2, -2i64..=2, -3i64..=3, 0..3u8).prop_map(|(a, b, c, r)| {
            let e = E::term(a, Var::new("x")).plus(&E::term(b, Var::new("y"))).plus(&E::int(c));
            let rel = [Rel::Le, Rel::Lt, Rel::Eq][r as usize];
            F::atom(e, rel)
        })
    }

    fn arb_formula() -> impl Strategy<Value = F> {
        arb_atom().prop_recursive(3, 24, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(|f| F::Not(Box::new(f))),
                prop::collection::vec(inner.clone(), 2..3).prop_map(F::And),
                prop::collection::vec(inner.clone(), 2..3).prop_map(F::Or),
                (inner.clone(), inner).prop_map(|(a, b)| F::Implies(Box::new(a), Box::new(b))),
            ]
        })
    }

    /// Independent truth-table semantics, written against the raw tree.
    fn oracle(f: &F, x: i64, y: i64) -> bool {
        match f {
            F::True => true,
            F::False => false,
            F::Atom(a) => {
                let v = a.expr.coeff(&Var::new("x")) * x + a.expr.coeff(&Var::new("y")) * y + a.expr.constant_part();
                match a.rel {
                    Rel::Le => v <= 0,
                    Rel::Lt => v < 0,
                    Rel::Eq => v == 0,
                }
            }
            F::Not(g) => !oracle(g, x, y),
            F::And(gs) => gs.iter().all(|g| oracle(g, x, y)),
            F::Or(gs) => gs.iter().any(|g| oracle(g, x, y)),
            F::Implies(a, b) => !oracle(a, x, y) || oracle(b, x, y),
            F::App(_) => unreachable!(),
        }
    }

    fn val(x: i64, y: i64) -> Valuation<i64> {
        [(Var::new("x"), x), (Var::new("y"), y)].into_iter().collect()
    }

    proptest! {
        #[test]
        fn evaluate_matches_truth_table(f in arb_formula()) {
            let none = Interpretation::new();
            for x in -3..=3 {
                for y in -3..=3 {
                    prop_assert_eq!(evaluate(&f, &val(x, y), &none).unwrap(), oracle(&f, x, y));
                }
            }
        }

        #[test]
        fn nnf_preserves_meaning_and_is_idempotent(f in arb_formula(), x in -5i64..5, y in -5i64..5) {
            let none = Interpretation::new();
            let n = f.nnf();
            prop_assert_eq!(evaluate(&n, &val(x, y), &none).unwrap(), oracle(&f, x, y));
            prop_assert_eq!(n.nnf(), n);
        }

        #[test]
        fn substitution_composes_with_valuation(f in arb_formula(), c in -3i64..=3, y in -3i64..=3) {
            let none = Interpretation::new();
            let mut map = BTreeMap::new();
            map.insert(Var::new("x"), E::int(c));
            let g = f.substitute(&map);
            let only_y: Valuation<i64> = [(Var::new("y"), y)].into_iter().collect();
            prop_assert_eq!(evaluate(&g, &only_y, &none).unwrap(), oracle(&f, c, y));
        }

        #[test]
        fn scalar_conversion_roundtrips(f in arb_formula()) {
            let big = f.try_map_scalar::<num_bigint::BigInt>().unwrap();
            prop_assert_eq!(big.try_map_scalar::<i64>().unwrap(), f);
        }
    }

    #[test]
    fn substitution_examples() {
        let gt = F::gt(&E::var("x"), &E::int(0));
        let mut to_y = BTreeMap::new();
        to_y.insert(Var::new("x"), E::var("y"));
        assert_eq!(gt.substitute(&to_y), F::gt(&E::var("y"), &E::int(0)));

        let mut to_3 = BTreeMap::new();
        to_3.insert(Var::new("x"), E::int(3));
        assert_eq!(gt.substitute(&to_3), F::True);

        let inv = PredicateSymbol::new(PredKind::Inv, "main", vec!["x".into()]).into_sym();
        let app = F::app(inv.clone(), vec![E::var("x")]);
        let mut prime = BTreeMap::new();
        prime.insert(Var::new("x"), Var::new("x").primed());
        assert_eq!(app.rename(&prime), F::app(inv, vec![E::var("x'")]));
    }
}
