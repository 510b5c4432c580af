use std::fmt::Write;

use super::ast::{Cond, Procedure, Program, Stmt};
use crate::LinExpr;

fn expr(e: &LinExpr) -> String {
    e.to_string()
}

fn cond(c: &Cond) -> String {
    match c {
        Cond::True => "true".into(),
        Cond::False => "false".into(),
        Cond::Nondet => "*".into(),
        Cond::Cmp(a, op, b) => format!("{} {} {}", expr(a), op.token(), expr(b)),
        Cond::Not(inner) => format!("!({})", cond(inner)),
        Cond::And(cs) => cs.iter().map(|c| format!("({})", cond(c))).collect::<Vec<_>>().join(" && "),
        Cond::Or(cs) => cs.iter().map(|c| format!("({})", cond(c))).collect::<Vec<_>>().join(" || "),
    }
}

fn block(stmts: &[Stmt], depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    for s in stmts {
        match s {
            Stmt::Assign { var, expr: e } => {
                let _ = writeln!(out, "{pad}{var} = {};", expr(e));
            }
            Stmt::If { cond: c, then, els } => {
                let _ = writeln!(out, "{pad}if ({}) {{", cond(c));
                block(then, depth + 1, out);
                if els.is_empty() {
                    let _ = writeln!(out, "{pad}}}");
                } else {
                    let _ = writeln!(out, "{pad}}} else {{");
                    block(els, depth + 1, out);
                    let _ = writeln!(out, "{pad}}}");
                }
            }
            Stmt::While { cond: c, body, .. } => {
                let _ = writeln!(out, "{pad}while ({}) {{", cond(c));
                block(body, depth + 1, out);
                let _ = writeln!(out, "{pad}}}");
            }
            Stmt::Call { results, callee, args, .. } => {
                let args = args.iter().map(expr).collect::<Vec<_>>().join(", ");
                if results.is_empty() {
                    let _ = writeln!(out, "{pad}call {callee}({args});");
                } else {
                    let _ = writeln!(out, "{pad}{} = call {callee}({args});", results.join(", "));
                }
            }
            Stmt::Return(vals) => {
                if vals.is_empty() {
                    let _ = writeln!(out, "{pad}return;");
                } else {
                    let vals = vals.iter().map(expr).collect::<Vec<_>>().join(", ");
                    let _ = writeln!(out, "{pad}return {vals};");
                }
            }
        }
    }
}

pub fn procedure_to_string(p: &Procedure) -> String {
    let mut out = format!("proc {}({}) {{\n", p.name, p.params.join(", "));
    block(&p.body, 1, &mut out);
    out.push_str("}\n");
    out
}

/// Source text that parses back to a structurally identical program,
/// provided the entry procedure is `main` or listed first.
pub fn program_to_string(prog: &Program) -> String {
    prog.procedures.iter().map(procedure_to_string).collect::<Vec<_>>().join("\n")
}
