use std::collections::BTreeSet;

use num_bigint::BigInt;

use super::ast::{CmpOp, Cond, Pos, Procedure, Program, Stmt};
use super::IrError;
use crate::logic::Var;
use crate::LinExpr;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(BigInt),
    Sym(&'static str),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(n) => format!("integer `{n}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

const SYMBOLS: &[&str] =
    &["<=", ">=", "==", "!=", "&&", "||", "(", ")", "{", "}", ",", ";", "=", "+", "-", "*", "/", "%", "<", ">", "!"];

fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, IrError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += i - start;
            out.push((Tok::Ident(word), pos));
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let digits: String = chars[start..i].iter().collect();
            col += i - start;
            out.push((Tok::Int(digits.parse().expect("decimal digits")), pos));
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let sym = SYMBOLS
            .iter()
            .find(|s| s.len() == 2 && **s == two)
            .or_else(|| SYMBOLS.iter().find(|s| s.len() == 1 && s.starts_with(c)));
        match sym {
            Some(s) => {
                i += s.len();
                col += s.len();
                out.push((Tok::Sym(s), pos));
            }
            None => return Err(IrError::Syntax { pos, expected: "a token".into(), found: format!("character `{c}`") }),
        }
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

const KEYWORDS: &[&str] = &["proc", "if", "else", "while", "return", "call", "true", "false"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> Result<T, IrError> {
        Err(IrError::Syntax { pos: self.pos(), expected: expected.to_string(), found: self.peek().describe() })
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(t) if t == kw)
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), IrError> {
        if self.is_sym(s) {
            self.bump();
            Ok(())
        } else {
            self.error(&format!("'{s}'"))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), IrError> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            self.error(&format!("'{kw}'"))
        }
    }

    fn ident(&mut self) -> Result<String, IrError> {
        match self.peek() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => self.error("identifier"),
        }
    }

    fn program(&mut self) -> Result<Vec<Procedure>, IrError> {
        let mut procs = Vec::new();
        loop {
            if matches!(self.peek(), Tok::Eof) && !procs.is_empty() {
                return Ok(procs);
            }
            procs.push(self.procedure()?);
        }
    }

    fn procedure(&mut self) -> Result<Procedure, IrError> {
        let pos = self.pos();
        self.expect_kw("proc")?;
        let name = self.ident()?;
        self.expect_sym("(")?;
        let mut params = Vec::new();
        if !self.is_sym(")") {
            loop {
                let p = self.ident()?;
                if params.contains(&p) {
                    return Err(IrError::Duplicate { pos, what: format!("parameter `{p}`") });
                }
                params.push(p);
                if self.is_sym(",") {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        let body = self.block()?;
        Ok(Procedure { name, params, returns: 0, body, call_sites: Vec::new(), pos })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, IrError> {
        self.expect_sym("{")?;
        let mut stmts = Vec::new();
        while !self.is_sym("}") {
            if matches!(self.peek(), Tok::Eof) {
                return self.error("'}'");
            }
            stmts.push(self.statement()?);
        }
        self.bump();
        Ok(stmts)
    }

    fn statement(&mut self) -> Result<Stmt, IrError> {
        if self.is_kw("if") {
            self.bump();
            self.expect_sym("(")?;
            let cond = self.cond()?;
            self.expect_sym(")")?;
            let then = self.block()?;
            let els = if self.is_kw("else") {
                self.bump();
                if self.is_kw("if") {
                    vec![self.statement()?]
                } else {
                    self.block()?
                }
            } else {
                Vec::new()
            };
            return Ok(Stmt::If { cond, then, els });
        }
        if self.is_kw("while") {
            self.bump();
            self.expect_sym("(")?;
            let cond = self.cond()?;
            self.expect_sym(")")?;
            let body = self.block()?;
            return Ok(Stmt::While { id: 0, cond, body });
        }
        if self.is_kw("return") {
            self.bump();
            let mut vals = Vec::new();
            if !self.is_sym(";") {
                vals.push(self.expr()?);
                while self.is_sym(",") {
                    self.bump();
                    vals.push(self.expr()?);
                }
            }
            self.expect_sym(";")?;
            return Ok(Stmt::Return(vals));
        }
        if self.is_kw("call") {
            let stmt = self.call_rhs(Vec::new())?;
            self.expect_sym(";")?;
            return Ok(stmt);
        }
        let first = self.ident()?;
        let mut targets = vec![first];
        while self.is_sym(",") {
            self.bump();
            targets.push(self.ident()?);
        }
        self.expect_sym("=")?;
        let stmt = if self.is_kw("call") {
            self.call_rhs(targets)?
        } else if targets.len() == 1 {
            Stmt::Assign { var: targets.pop().unwrap(), expr: self.expr()? }
        } else {
            return self.error("'call'");
        };
        self.expect_sym(";")?;
        Ok(stmt)
    }

    fn call_rhs(&mut self, results: Vec<String>) -> Result<Stmt, IrError> {
        self.expect_kw("call")?;
        let callee = self.ident()?;
        self.expect_sym("(")?;
        let mut args = Vec::new();
        if !self.is_sym(")") {
            args.push(self.expr()?);
            while self.is_sym(",") {
                self.bump();
                args.push(self.expr()?);
            }
        }
        self.expect_sym(")")?;
        Ok(Stmt::Call { site: 0, results, callee, args })
    }

    fn cond(&mut self) -> Result<Cond, IrError> {
        let mut parts = vec![self.conj()?];
        while self.is_sym("||") {
            self.bump();
            parts.push(self.conj()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Cond::Or(parts) })
    }

    fn conj(&mut self) -> Result<Cond, IrError> {
        let mut parts = vec![self.cond_atom()?];
        while self.is_sym("&&") {
            self.bump();
            parts.push(self.cond_atom()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Cond::And(parts) })
    }

    fn cond_atom(&mut self) -> Result<Cond, IrError> {
        if self.is_sym("!") {
            self.bump();
            return Ok(Cond::Not(Box::new(self.cond_atom()?)));
        }
        if self.is_sym("*") {
            self.bump();
            return Ok(Cond::Nondet);
        }
        if self.is_kw("true") {
            self.bump();
            return Ok(Cond::True);
        }
        if self.is_kw("false") {
            self.bump();
            return Ok(Cond::False);
        }
        if self.is_sym("(") {
            let save = self.at;
            self.bump();
            if let Ok(c) = self.cond() {
                if self.is_sym(")") {
                    self.bump();
                    if self.cmp_op().is_none() {
                        return Ok(c);
                    }
                }
            }
            self.at = save;
        }
        let lhs = self.expr()?;
        let Some(op) = self.cmp_op() else {
            return self.error("comparison operator");
        };
        self.bump();
        let rhs = self.expr()?;
        Ok(Cond::Cmp(lhs, op, rhs))
    }

    fn cmp_op(&self) -> Option<CmpOp> {
        match self.peek() {
            Tok::Sym("<") => Some(CmpOp::Lt),
            Tok::Sym("<=") => Some(CmpOp::Le),
            Tok::Sym(">") => Some(CmpOp::Gt),
            Tok::Sym(">=") => Some(CmpOp::Ge),
            Tok::Sym("==") => Some(CmpOp::Eq),
            Tok::Sym("!=") => Some(CmpOp::Ne),
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<LinExpr, IrError> {
        let mut acc = self.term()?;
        loop {
            if self.is_sym("+") {
                self.bump();
                acc = acc.plus(&self.term()?);
            } else if self.is_sym("-") {
                self.bump();
                acc = acc.minus(&self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<LinExpr, IrError> {
        let mut acc = self.factor()?;
        loop {
            let pos = self.pos();
            if self.is_sym("*") {
                self.bump();
                let rhs = self.factor()?;
                acc = match (acc.as_constant(), rhs.as_constant()) {
                    (Some(k), _) => rhs.scale(k),
                    (_, Some(k)) => acc.scale(k),
                    _ => return Err(IrError::Unsupported { pos, what: "nonlinear multiplication".into() }),
                };
            } else if self.is_sym("/") || self.is_sym("%") {
                return Err(IrError::Unsupported { pos, what: "division".into() });
            } else {
                return Ok(acc);
            }
        }
    }

    fn factor(&mut self) -> Result<LinExpr, IrError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(LinExpr::constant(n))
            }
            Tok::Sym("-") => {
                self.bump();
                Ok(self.factor()?.neg())
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                if self.is_sym("(") {
                    return Err(IrError::Unsupported {
                        pos: self.pos(),
                        what: format!("function application `{name}(..)` outside a call statement"),
                    });
                }
                Ok(LinExpr::var(Var::new(name)))
            }
            _ => self.error("expression"),
        }
    }
}

/// Parses and resolves a program; the entry is `main` if present, else the first procedure.
pub fn parse_program(source: &str) -> Result<Program, IrError> {
    let mut parser = Parser { toks: lex(source)?, at: 0 };
    let mut procedures = parser.program()?;
    for p in &mut procedures {
        p.renumber();
        p.returns = check_returns(p)?;
    }
    let mut names = BTreeSet::new();
    for p in &procedures {
        if !names.insert(p.name.clone()) {
            return Err(IrError::Duplicate { pos: p.pos, what: format!("procedure `{}`", p.name) });
        }
    }
    let entry = if names.contains("main") { "main".to_string() } else { procedures[0].name.clone() };
    let prog = Program { procedures, entry };
    validate(&prog)?;
    Ok(prog)
}

fn check_returns(p: &Procedure) -> Result<usize, IrError> {
    fn nested_return(stmts: &[Stmt]) -> bool {
        stmts.iter().any(|s| match s {
            Stmt::Return(_) => true,
            Stmt::If { then, els, .. } => nested_return(then) || nested_return(els),
            Stmt::While { body, .. } => nested_return(body),
            _ => false,
        })
    }
    let (last, rest) = match p.body.split_last() {
        Some((Stmt::Return(vals), rest)) => (vals.len(), rest),
        _ => (0, p.body.as_slice()),
    };
    if nested_return(rest) {
        return Err(IrError::Unsupported {
            pos: p.pos,
            what: format!("`return` before the end of procedure `{}`", p.name),
        });
    }
    Ok(last)
}

/// Checks call resolution, arities, and variable declarations.
pub fn validate(prog: &Program) -> Result<(), IrError> {
    if prog.procedure(&prog.entry).is_none() {
        return Err(IrError::UnresolvedCallee { pos: Pos::default(), name: prog.entry.clone() });
    }
    for p in &prog.procedures {
        for site in &p.call_sites {
            let callee = prog
                .procedure(&site.callee)
                .ok_or_else(|| IrError::UnresolvedCallee { pos: p.pos, name: site.callee.clone() })?;
            if callee.params.len() != site.args.len() {
                return Err(IrError::Arity {
                    pos: p.pos,
                    callee: site.callee.clone(),
                    what: "arguments",
                    expected: callee.params.len(),
                    got: site.args.len(),
                });
            }
            if callee.returns != site.results.len() && !site.results.is_empty() {
                return Err(IrError::Arity {
                    pos: p.pos,
                    callee: site.callee.clone(),
                    what: "results",
                    expected: callee.returns,
                    got: site.results.len(),
                });
            }
        }
        let declared: BTreeSet<String> = p.variables().into_iter().collect();
        let mut used = BTreeSet::new();
        collect_reads(&p.body, &mut used);
        if let Some(v) = used.difference(&declared).next() {
            return Err(IrError::Undeclared { procedure: p.name.clone(), var: v.clone() });
        }
    }
    Ok(())
}

fn collect_reads(stmts: &[Stmt], out: &mut BTreeSet<String>) {
    let lin = |e: &LinExpr, out: &mut BTreeSet<String>| out.extend(e.vars().map(|v| v.name().to_string()));
    for s in stmts {
        match s {
            Stmt::Assign { expr, .. } => lin(expr, out),
            Stmt::If { cond, then, els } => {
                cond.vars(out);
                collect_reads(then, out);
                collect_reads(els, out);
            }
            Stmt::While { cond, body, .. } => {
                cond.vars(out);
                collect_reads(body, out);
            }
            Stmt::Call { args, .. } => args.iter().for_each(|a| lin(a, out)),
            Stmt::Return(vals) => vals.iter().for_each(|a| lin(a, out)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn countdown_structure() {
        let p = parse_program("proc main(x) { while (x > 0) { x = x - 1; } return x; }").unwrap();
        assert_eq!(p.procedures.len(), 1);
        assert_eq!(p.procedures[0].loop_count(), 1);
        assert_eq!(p.call_site_count(), 0);
        assert_eq!(p.procedures[0].returns, 1);
    }

    #[test]
    fn empty_input_expects_proc() {
        let err = parse_program("").unwrap_err();
        assert!(err.to_string().contains("expected 'proc'"), "{err}");
    }

    #[test]
    fn unresolved_callee_is_named() {
        let err = parse_program("proc main(x) { y = call g(x); return y; }").unwrap_err();
        assert!(matches!(&err, IrError::UnresolvedCallee { name, .. } if name == "g"), "{err}");
        assert!(err.to_string().contains('g'));
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        let src = "proc g(a, b) { return a; } proc main(x) { y = call g(x); return y; }";
        assert!(matches!(parse_program(src), Err(IrError::Arity { .. })));
        let src = "proc g(a) { return a; } proc main(x) { y, z = call g(x); return y; }";
        assert!(matches!(parse_program(src), Err(IrError::Arity { .. })));
    }

    #[test]
    fn nonlinear_and_division_are_rejected() {
        assert!(matches!(parse_program("proc main(x, y) { x = x * y; return x; }"), Err(IrError::Unsupported { .. })));
        assert!(matches!(parse_program("proc main(x) { x = x / 2; return x; }"), Err(IrError::Unsupported { .. })));
        assert!(parse_program("proc main(x) { x = 3 * (x - 1) * 2; return x; }").is_ok());
    }

    #[test]
    fn undeclared_variable_is_rejected() {
        assert!(matches!(parse_program("proc main(x) { x = y; return x; }"), Err(IrError::Undeclared { .. })));
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_program("proc main(x) {\n  x = ;\n}").unwrap_err();
        match err {
            IrError::Syntax { pos, .. } => assert_eq!(pos, Pos { line: 2, col: 7 }),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn conditions_with_parentheses() {
        let p =
            parse_program("proc main(x, y) { while ((x + 1) > 0 && (y < 3 || *)) { x = x - 1; } return; }").unwrap();
        match &p.procedures[0].body[0] {
            Stmt::While { cond: Cond::And(parts), .. } => {
                assert!(matches!(parts[0], Cond::Cmp(_, CmpOp::Gt, _)));
                assert!(matches!(parts[1], Cond::Or(_)));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sites_and_loops_are_numbered_in_preorder() {
        let src = "proc g(a) { return a; }
            proc main(x) {
              while (x > 0) { y = call g(x); while (y > 0) { y = y - 1; } x = x - 1; }
              z = call g(3);
              return z;
            }";
        let p = parse_program(src).unwrap();
        let main = p.procedure("main").unwrap();
        assert_eq!(main.call_sites.iter().map(|s| s.id).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(main.loop_count(), 2);
        assert_eq!(p.entry, "main");
    }

    #[test]
    fn early_return_is_rejected() {
        assert!(matches!(
            parse_program("proc main(x) { if (x > 0) { return x; } return 0; }"),
            Err(IrError::Unsupported { .. })
        ));
    }
}
