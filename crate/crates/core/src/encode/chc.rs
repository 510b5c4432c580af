use std::fmt::Write;

use super::ConstraintSystem;
use crate::logic::smt;

/// SMT-LIB2 script declaring every unknown and asserting every clause.
pub fn to_smtlib(sys: &ConstraintSystem) -> String {
    let mut out = String::from("(set-logic HORN)\n");
    for s in sys.symbols() {
        let sorts = vec!["Int"; s.arity].join(" ");
        let _ = writeln!(out, "(declare-fun {} ({sorts}) Bool)", smt::symbol(&s.name()));
    }
    for c in &sys.clauses {
        let vars = c.vars();
        let body = smt::term(&c.formula());
        if vars.is_empty() {
            let _ = writeln!(out, "(assert {body})");
        } else {
            let binders: Vec<String> = vars.iter().map(|v| format!("({} Int)", smt::symbol(v.name()))).collect();
            let _ = writeln!(out, "(assert (forall ({}) {body}))", binders.join(" "));
        }
    }
    out.push_str("(check-sat)\n");
    out
}
