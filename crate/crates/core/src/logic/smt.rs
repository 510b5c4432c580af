//! SMT-LIB2 term printing and model parsing.

use std::fmt::Write;

use thiserror::Error;

use super::{Formula, LinExpr, Rel, Scalar, Valuation, Var};

/// Quotes a symbol with `|..|` unless it is a simple SMT-LIB2 symbol.
pub fn symbol(name: &str) -> String {
    let simple = !name.is_empty()
        && !name.starts_with(|c: char| c.is_ascii_digit())
        && name.chars().all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c));
    if simple {
        name.to_string()
    } else {
        format!("|{}|", name.replace('|', "_"))
    }
}

fn int<S: Scalar>(c: &S) -> String {
    if c.is_negative() {
        format!("(- {})", c.abs())
    } else {
        c.to_string()
    }
}

pub fn lin_term<S: Scalar>(e: &LinExpr<S>) -> String {
    let mut parts: Vec<String> = e
        .terms()
        .map(|(v, c)| if c.is_one() { symbol(v.name()) } else { format!("(* {} {})", int(c), symbol(v.name())) })
        .collect();
    if !e.constant_part().is_zero() || parts.is_empty() {
        parts.push(int(e.constant_part()));
    }
    if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        format!("(+ {})", parts.join(" "))
    }
}

/// Prints a formula as an SMT-LIB2 `Bool` term over sort `Int`.
pub fn term<S: Scalar>(f: &Formula<S>) -> String {
    let mut out = String::new();
    write_term(f, &mut out);
    out
}

fn write_term<S: Scalar>(f: &Formula<S>, out: &mut String) {
    match f {
        Formula::True => out.push_str("true"),
        Formula::False => out.push_str("false"),
        Formula::Atom(a) => {
            let op = match a.rel {
                Rel::Le => "<=",
                Rel::Lt => "<",
                Rel::Eq => "=",
            };
            let _ = write!(out, "({op} {} 0)", lin_term(&a.expr));
        }
        Formula::Not(g) => {
            out.push_str("(not ");
            write_term(g, out);
            out.push(')');
        }
        Formula::And(gs) | Formula::Or(gs) => {
            out.push_str(if matches!(f, Formula::And(_)) { "(and" } else { "(or" });
            for g in gs {
                out.push(' ');
                write_term(g, out);
            }
            out.push(')');
        }
        Formula::Implies(a, b) => {
            out.push_str("(=> ");
            write_term(a, out);
            out.push(' ');
            write_term(b, out);
            out.push(')');
        }
        Formula::App(app) => {
            if app.args.is_empty() {
                out.push_str(&symbol(&app.symbol.name()));
            } else {
                let _ = write!(out, "({}", symbol(&app.symbol.name()));
                for a in &app.args {
                    let _ = write!(out, " {}", lin_term(a));
                }
                out.push(')');
            }
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("unbalanced parentheses in solver output")]
    Unbalanced,
    #[error("unexpected model entry: {0}")]
    Unexpected(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

pub(crate) fn parse_sexps(text: &str) -> Result<Vec<Sexp>, ModelError> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '(' => stack.push(Vec::new()),
            ')' => {
                let done = stack.pop().ok_or(ModelError::Unbalanced)?;
                stack.last_mut().ok_or(ModelError::Unbalanced)?.push(Sexp::List(done));
            }
            '|' => {
                let mut s = String::new();
                for d in chars.by_ref() {
                    if d == '|' {
                        break;
                    }
                    s.push(d);
                }
                stack.last_mut().ok_or(ModelError::Unbalanced)?.push(Sexp::Atom(s));
            }
            ';' => {
                for d in chars.by_ref() {
                    if d == '\n' {
                        break;
                    }
                }
            }
            c if c.is_whitespace() => {}
            c => {
                let mut s = String::from(c);
                while let Some(&d) = chars.peek() {
                    if d.is_whitespace() || d == '(' || d == ')' {
                        break;
                    }
                    s.push(d);
                    chars.next();
                }
                stack.last_mut().ok_or(ModelError::Unbalanced)?.push(Sexp::Atom(s));
            }
        }
    }
    if stack.len() != 1 {
        return Err(ModelError::Unbalanced);
    }
    Ok(stack.pop().unwrap())
}

fn int_value<S: Scalar>(e: &Sexp) -> Option<S> {
    match e {
        Sexp::Atom(a) => S::from_str(a).ok(),
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(m), inner] if m == "-" => int_value::<S>(inner).map(|v| -v),
            _ => None,
        },
    }
}

/// Parses a `get-model` response made of `(define-fun v () Int k)` entries.
pub fn parse_model<S: Scalar>(text: &str) -> Result<Valuation<S>, ModelError> {
    let mut out = Valuation::new();
    let mut entries = Vec::new();
    for top in parse_sexps(text)? {
        match top {
            Sexp::List(items) if items.first() == Some(&Sexp::Atom("model".into())) => {
                entries.extend(items.into_iter().skip(1))
            }
            Sexp::List(items) if matches!(items.first(), Some(Sexp::Atom(a)) if a == "define-fun") => {
                entries.push(Sexp::List(items))
            }
            Sexp::List(items) => entries.extend(items),
            other => return Err(ModelError::Unexpected(format!("{other:?}"))),
        }
    }
    for entry in entries {
        let Sexp::List(items) = &entry else {
            return Err(ModelError::Unexpected(format!("{entry:?}")));
        };
        match items.as_slice() {
            [Sexp::Atom(kw), Sexp::Atom(name), Sexp::List(args), Sexp::Atom(sort), value]
                if kw == "define-fun" && args.is_empty() =>
            {
                if sort != "Int" {
                    continue;
                }
                let v = int_value::<S>(value).ok_or_else(|| ModelError::Unexpected(format!("{value:?}")))?;
                out.insert(Var::new(name), v);
            }
            [Sexp::Atom(kw), ..] if kw == "define-fun" => {}
            _ => return Err(ModelError::Unexpected(format!("{entry:?}"))),
        }
    }
    Ok(out)
}

/// Parses a `get-value` response `((v k) ...)` into a map keyed by the unquoted name.
pub fn parse_value_pairs<S: Scalar>(text: &str) -> Result<std::collections::BTreeMap<String, S>, ModelError> {
    let mut out = std::collections::BTreeMap::new();
    for top in parse_sexps(text)? {
        let Sexp::List(pairs) = top else { return Err(ModelError::Unexpected(format!("{top:?}"))) };
        for pair in pairs {
            match &pair {
                Sexp::List(kv) if kv.len() == 2 => {
                    let Sexp::Atom(name) = &kv[0] else { return Err(ModelError::Unexpected(format!("{pair:?}"))) };
                    let v = int_value::<S>(&kv[1]).ok_or_else(|| ModelError::Unexpected(format!("{pair:?}")))?;
                    out.insert(name.clone(), v);
                }
                _ => return Err(ModelError::Unexpected(format!("{pair:?}"))),
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    type F = Formula<i64>;
    type E = LinExpr<i64>;

    #[test]
    fn prints_countdown_transition() {
        let f = F::and([F::gt(&E::var("x"), &E::int(0)), F::eq(&E::var("x'"), &E::var("x").minus(&E::int(1)))]);
        assert_eq!(term(&f), "(and (< (* (- 1) x) 0) (= (+ (* (- 1) x) |x'| 1) 0))");
    }

    #[test]
    fn parses_value_pairs() {
        let m = parse_value_pairs::<i64>("((x 3)\n (|y'| (- 2)))").unwrap();
        assert_eq!(m["x"], 3);
        assert_eq!(m["y'"], -2);
    }

    #[test]
    fn quotes_only_when_needed() {
        assert_eq!(symbol("x"), "x");
        assert_eq!(symbol("Inv_main@f.1"), "Inv_main@f.1");
        assert_eq!(symbol("x'"), "|x'|");
        assert_eq!(symbol("1x"), "|1x|");
    }

    #[test]
    fn parses_z3_style_model() {
        let text =
            "(\n  (define-fun x () Int\n    4)\n  (define-fun |y'| () Int (- 12))\n  (define-fun b () Bool true)\n)";
        let m = parse_model::<i64>(text).unwrap();
        assert_eq!(m.get(&Var::new("x")), Some(&4));
        assert_eq!(m.get(&Var::new("y'")), Some(&-12));
        assert_eq!(m.len(), 2);
    }

    #[test]
    fn parses_model_keyword_form() {
        let m = parse_model::<i64>("(model (define-fun k () Int 7))").unwrap();
        assert_eq!(m.get(&Var::new("k")), Some(&7));
        assert_eq!(parse_model::<i64>("(("), Err(ModelError::Unbalanced));
    }
}
