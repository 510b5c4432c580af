//! Parametric predicate shapes.
//!
//! Invariant-like unknowns are conjunctions of rows `r(x) ≤ p` or `r(x) ≥ p`
//! whose constant `p` ranges over `[-B-1, B+1]`; the outermost value in the
//! weak direction stands for an absent row, so every template has a top
//! element and all point constraints stay linear in the parameters.
//! Ranking unknowns are linear (or lexicographic) functions `R` with
//! `RR(x, x') ≡ R(x) ≥ 0 ∧ R(x) − R(x') ≥ 1`, well-founded by construction.

use std::collections::BTreeMap;

use num_traits::Zero;

use super::SynthError;
use crate::encode::ConstraintSystem;
use crate::logic::{PredKind, Sym, Var};
use crate::{Formula, Int, Lambda, LinExpr, Valuation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    Interval,
    /// Interval rows plus pairwise differences.
    Polyhedra,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ranking {
    Linear,
    Lexicographic(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct TemplateConfig {
    pub domain: Domain,
    pub ranking: Ranking,
    /// `B`: row constants range over `[-B-1, B+1]`, ranking constants over `[-B, B]`.
    pub const_bound: i64,
    /// `K`: ranking coefficients range over `[-K, K]`.
    pub coeff_bound: i64,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        TemplateConfig { domain: Domain::Interval, ranking: Ranking::Linear, const_bound: 6, coeff_bound: 2 }
    }
}

/// An unknown parameter and its range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Param {
    pub var: Var,
    pub lo: i64,
    pub hi: i64,
}

/// Direction in which a row parameter weakens the predicate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    /// `r(x) ≤ p`; larger `p` is weaker.
    Upper,
    /// `r(x) ≥ p`; smaller `p` is weaker.
    Lower,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Row {
    /// Coefficients over argument positions.
    pub coeffs: Vec<(usize, i64)>,
    pub sense: Sense,
    pub param: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankFn {
    /// `(argument position, parameter index)`.
    pub coeffs: Vec<(usize, usize)>,
    pub constant: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Shape {
    /// Per location, a conjunction of rows.
    Rows(Vec<Vec<Row>>),
    /// Per location, the lexicographic components; the first half of the
    /// arguments is the source state, the second half the target state.
    Rank(Vec<Vec<RankFn>>),
}

/// Location split: argument positions holding the location in the source
/// (and, for rankings, the target), and the location values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Locations {
    pub arg: usize,
    pub target_arg: Option<usize>,
    pub values: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Template {
    pub symbol: Sym,
    pub params: Vec<Param>,
    pub shape: Shape,
    pub locations: Option<Locations>,
    pub bound: i64,
}

fn param_var(sym: &Sym, what: &str) -> Var {
    Var::new(format!("{}#{what}", sym.name()))
}

fn loc_tag(locs: &Option<Locations>, i: usize) -> String {
    match locs {
        Some(l) => format!("@{}", l.values[i]),
        None => String::new(),
    }
}

impl Template {
    /// Template for `sym`; `pc_values` gives the location values when the
    /// symbol's arguments include the location variable `pc!`.
    pub fn new(sym: &Sym, cfg: &TemplateConfig, pc_values: Option<&[i64]>) -> Template {
        let locations = pc_values.and_then(|values| {
            let arg = sym.roles.iter().position(|r| r == "pc!")?;
            let target_arg = sym.roles.iter().position(|r| r == "pc!'");
            Some(Locations { arg, target_arg, values: values.to_vec() })
        });
        let n_locs = locations.as_ref().map_or(1, |l| l.values.len());
        let skip = |i: usize| locations.as_ref().is_some_and(|l| l.arg == i || l.target_arg == Some(i));
        let b = cfg.const_bound;
        let mut params = Vec::new();
        let shape = if sym.kind.is_ranking() {
            let half = sym.arity / 2;
            let k = match cfg.ranking {
                Ranking::Linear => 1,
                Ranking::Lexicographic(k) => k.max(1),
            };
            let mut per_loc = Vec::new();
            for l in 0..n_locs {
                let tag = loc_tag(&locations, l);
                let mut comps = Vec::new();
                for j in 0..k {
                    let mut coeffs = Vec::new();
                    for i in (0..half).filter(|&i| !skip(i)) {
                        coeffs.push((i, params.len()));
                        params.push(Param {
                            var: param_var(sym, &format!("c{j}.{}{tag}", sym.roles[i])),
                            lo: -cfg.coeff_bound,
                            hi: cfg.coeff_bound,
                        });
                    }
                    let constant = params.len();
                    params.push(Param { var: param_var(sym, &format!("c{j}.0{tag}")), lo: -b, hi: b });
                    comps.push(RankFn { coeffs, constant });
                }
                per_loc.push(comps);
            }
            Shape::Rank(per_loc)
        } else {
            let args: Vec<usize> = (0..sym.arity).filter(|&i| !skip(i)).collect();
            let mut per_loc = Vec::new();
            for l in 0..n_locs {
                let tag = loc_tag(&locations, l);
                let mut rows = Vec::new();
                let mut add = |coeffs: Vec<(usize, i64)>, sense: Sense, name: String| {
                    rows.push(Row { coeffs, sense, param: params.len() });
                    params.push(Param { var: param_var(sym, &format!("{name}{tag}")), lo: -b - 1, hi: b + 1 });
                };
                for &i in &args {
                    let r = &sym.roles[i];
                    add(vec![(i, 1)], Sense::Lower, format!("lo.{r}"));
                    add(vec![(i, 1)], Sense::Upper, format!("hi.{r}"));
                }
                if cfg.domain == Domain::Polyhedra {
                    for (a, &i) in args.iter().enumerate() {
                        for &j in &args[a + 1..] {
                            let name = format!("{}-{}", sym.roles[i], sym.roles[j]);
                            add(vec![(i, 1), (j, -1)], Sense::Lower, format!("lo.{name}"));
                            add(vec![(i, 1), (j, -1)], Sense::Upper, format!("hi.{name}"));
                        }
                    }
                }
                per_loc.push(rows);
            }
            Shape::Rows(per_loc)
        };
        Template { symbol: sym.clone(), params, shape, locations, bound: b }
    }

    /// Template for an unknown of `sys`, split by location where the owner has several.
    pub fn for_system(sym: &Sym, sys: &ConstraintSystem, cfg: &TemplateConfig) -> Template {
        let locs = match sym.kind {
            PredKind::Inv | PredKind::RR => {
                sys.iots.get(&sym.owner).filter(|t| t.pc.is_some()).map(|t| t.locations.as_slice())
            }
            _ => None,
        };
        Template::new(sym, cfg, locs)
    }

    pub fn is_ranking(&self) -> bool {
        matches!(self.shape, Shape::Rank(_))
    }

    /// Value of an absent row: the weakest end of the parameter range.
    fn absent(&self, sense: Sense) -> i64 {
        match sense {
            Sense::Upper => self.bound + 1,
            Sense::Lower => -self.bound - 1,
        }
    }

    fn rows(&self) -> impl Iterator<Item = &Row> {
        let per_loc: &[Vec<Row>] = match &self.shape {
            Shape::Rows(r) => r,
            Shape::Rank(_) => &[],
        };
        per_loc.iter().flatten()
    }

    /// Parameters of the top element (every row absent); rankings have no top.
    pub fn top(&self) -> Option<Valuation> {
        if self.is_ranking() {
            return None;
        }
        let mut v = Valuation::new();
        for r in self.rows() {
            v.insert(self.params[r.param].var.clone(), Int::from(self.absent(r.sense)));
        }
        Some(v)
    }

    /// Parameters of the strongest element.
    pub fn bottom(&self) -> Option<Valuation> {
        if self.is_ranking() {
            return None;
        }
        let mut v = Valuation::new();
        for r in self.rows() {
            let strongest = -self.absent(r.sense);
            v.insert(self.params[r.param].var.clone(), Int::from(strongest));
        }
        Some(v)
    }

    fn get(&self, params: &Valuation, i: usize) -> Result<Int, SynthError> {
        params
            .get(&self.params[i].var)
            .cloned()
            .ok_or_else(|| SynthError::MissingParameter(self.params[i].var.name().to_string()))
    }

    /// Concrete predicate for the given parameter values.
    pub fn instantiate(&self, params: &Valuation) -> Result<Lambda, SynthError> {
        let formals: Vec<Var> = (0..self.symbol.arity).map(|i| Var::new(format!("a{i}"))).collect();
        let x = |i: usize| LinExpr::var(formals[i].clone());
        let mut cases = Vec::new();
        let n_locs = self.locations.as_ref().map_or(1, |l| l.values.len());
        let guard = |l: usize, target: Option<usize>| -> Vec<Formula> {
            let Some(locs) = &self.locations else { return Vec::new() };
            let mut g = vec![Formula::eq(&x(locs.arg), &LinExpr::int(locs.values[l]))];
            if let (Some(t), Some(arg)) = (target, locs.target_arg) {
                g.push(Formula::eq(&x(arg), &LinExpr::int(locs.values[t])));
            }
            g
        };
        match &self.shape {
            Shape::Rows(per_loc) => {
                for (l, rows) in per_loc.iter().enumerate() {
                    let mut parts = guard(l, None);
                    for r in rows {
                        let p = self.get(params, r.param)?;
                        if p == Int::from(self.absent(r.sense)) {
                            continue;
                        }
                        let mut e = LinExpr::zero();
                        for &(i, c) in &r.coeffs {
                            e = e.plus(&x(i).scale(&Int::from(c)));
                        }
                        let p = LinExpr::constant(p);
                        parts.push(match r.sense {
                            Sense::Upper => Formula::le(&e, &p),
                            Sense::Lower => Formula::ge(&e, &p),
                        });
                    }
                    cases.push(Formula::and(parts));
                }
            }
            Shape::Rank(per_loc) => {
                let half = self.symbol.arity / 2;
                let eval = |f: &RankFn, offset: usize| -> Result<LinExpr, SynthError> {
                    let mut e = LinExpr::constant(self.get(params, f.constant)?);
                    for &(i, p) in &f.coeffs {
                        e = e.plus(&x(i + offset).scale(&self.get(params, p)?));
                    }
                    Ok(e)
                };
                for (l, src) in per_loc.iter().enumerate() {
                    let targets: Vec<Option<usize>> = if self.locations.as_ref().is_some_and(|l| l.target_arg.is_some())
                    {
                        (0..n_locs).map(Some).collect()
                    } else {
                        vec![None]
                    };
                    for t in targets {
                        let dst = &per_loc[t.unwrap_or(l)];
                        let mut r_src = Vec::new();
                        let mut r_dst = Vec::new();
                        for (a, b) in src.iter().zip(dst) {
                            r_src.push(eval(a, 0)?);
                            r_dst.push(eval(b, half)?);
                        }
                        let mut parts = guard(l, t);
                        parts.push(lex_decrease(&r_src, &r_dst));
                        cases.push(Formula::and(parts));
                    }
                }
            }
        }
        Ok(Lambda::new(formals, Formula::or(cases).simplify()))
    }

    /// Linear constraint over the parameters saying the predicate holds at
    /// the concrete argument vector `args`.
    pub fn at_point(&self, args: &[Int]) -> Formula {
        let p = |i: usize| LinExpr::var(self.params[i].var.clone());
        let loc_index = |arg: usize| -> Option<usize> {
            let locs = self.locations.as_ref()?;
            locs.values.iter().position(|v| Int::from(*v) == args[arg])
        };
        let (src, dst) = match &self.locations {
            None => (Some(0), Some(0)),
            Some(locs) => {
                let s = loc_index(locs.arg);
                let d = match locs.target_arg {
                    Some(t) => loc_index(t),
                    None => s,
                };
                (s, d)
            }
        };
        let (Some(src), Some(dst)) = (src, dst) else { return Formula::False };
        match &self.shape {
            Shape::Rows(per_loc) => Formula::and(
                per_loc[src]
                    .iter()
                    .map(|r| {
                        let mut v = Int::zero();
                        for &(i, c) in &r.coeffs {
                            v += &args[i] * Int::from(c);
                        }
                        let cap = Int::from(self.absent(r.sense));
                        match r.sense {
                            Sense::Upper => Formula::ge(&p(r.param), &LinExpr::constant(v.min(cap))),
                            Sense::Lower => Formula::le(&p(r.param), &LinExpr::constant(v.max(cap))),
                        }
                    })
                    .collect::<Vec<_>>(),
            ),
            Shape::Rank(per_loc) => {
                let half = self.symbol.arity / 2;
                let eval = |f: &RankFn, offset: usize| {
                    let mut e = p(f.constant);
                    for &(i, pi) in &f.coeffs {
                        e = e.plus(&p(pi).scale(&args[i + offset]));
                    }
                    e
                };
                let r_src: Vec<LinExpr> = per_loc[src].iter().map(|f| eval(f, 0)).collect();
                let r_dst: Vec<LinExpr> = per_loc[dst].iter().map(|f| eval(f, half)).collect();
                lex_decrease(&r_src, &r_dst)
            }
        }
    }

    /// Per-row signed change from `cur` towards weaker (`weaker = true`) or
    /// stronger parameter values; empty for rankings.
    pub fn deltas(&self, cur: &Valuation, weaker: bool) -> Vec<LinExpr> {
        self.rows()
            .map(|r| {
                let p = LinExpr::var(self.params[r.param].var.clone());
                let c = LinExpr::constant(cur.get(&self.params[r.param].var).cloned().unwrap_or_default());
                if (r.sense == Sense::Upper) == weaker {
                    p.minus(&c)
                } else {
                    c.minus(&p)
                }
            })
            .collect()
    }

    /// Parameter values at the strongest end of each row.
    pub fn strongest_preference(&self) -> Vec<(Var, i64)> {
        let mut out = self.preferred();
        for r in self.rows() {
            out[r.param].1 = -self.absent(r.sense);
        }
        out
    }

    /// Replaces interval locations that are empty (`lo > hi` on some
    /// argument) by the canonical strongest parameters.
    pub fn canonicalize(&self, params: &Valuation) -> Valuation {
        let Shape::Rows(per_loc) = &self.shape else { return params.clone() };
        let mut out = params.clone();
        for rows in per_loc {
            let mut lows: BTreeMap<usize, Int> = BTreeMap::new();
            let mut highs: BTreeMap<usize, Int> = BTreeMap::new();
            for r in rows {
                if let [(i, 1)] = r.coeffs[..] {
                    let v = params.get(&self.params[r.param].var).cloned().unwrap_or_default();
                    match r.sense {
                        Sense::Lower => lows.insert(i, v),
                        Sense::Upper => highs.insert(i, v),
                    };
                }
            }
            let empty = lows.iter().any(|(i, lo)| highs.get(i).is_some_and(|hi| lo > hi));
            if empty {
                for r in rows {
                    out.insert(self.params[r.param].var.clone(), Int::from(-self.absent(r.sense)));
                }
            }
        }
        out
    }

    /// Rowwise conjunction of two instances; `None` for rankings.
    pub fn meet(&self, a: &Valuation, b: &Valuation) -> Option<Valuation> {
        if self.is_ranking() {
            return None;
        }
        let mut out = a.clone();
        for r in self.rows() {
            let v = &self.params[r.param].var;
            let (x, y) = (a.get(v)?, b.get(v)?);
            let m = match r.sense {
                Sense::Upper => x.min(y),
                Sense::Lower => x.max(y),
            };
            out.insert(v.clone(), m.clone());
        }
        Some(self.canonicalize(&out))
    }

    /// Preferred value for each parameter when proposing: absent rows for
    /// invariant-like shapes, zero for ranking coefficients.
    pub fn preferred(&self) -> Vec<(Var, i64)> {
        let mut out: Vec<(Var, i64)> = self.params.iter().map(|p| (p.var.clone(), 0)).collect();
        for r in self.rows() {
            out[r.param].1 = self.absent(r.sense);
        }
        out
    }

    /// Number of grid points of the parameter space.
    pub fn grid_size(&self) -> u128 {
        self.params.iter().map(|p| (p.hi - p.lo + 1) as u128).product()
    }
}

/// `∨_j (R_j ≥ 0 ∧ R_j − R'_j ≥ 1 ∧ ∀i<j. R_i − R'_i ≥ 0)`.
fn lex_decrease(src: &[LinExpr], dst: &[LinExpr]) -> Formula {
    let zero = LinExpr::zero();
    let one = LinExpr::int(1);
    let mut options = Vec::new();
    for j in 0..src.len() {
        let mut parts: Vec<Formula> = (0..j).map(|i| Formula::ge(&src[i].minus(&dst[i]), &zero)).collect();
        parts.push(Formula::ge(&src[j], &zero));
        parts.push(Formula::ge(&src[j].minus(&dst[j]), &one));
        options.push(Formula::and(parts));
    }
    Formula::or(options)
}

/// Ranking value of component `j` at a concrete source vector (for tests and reports).
pub fn rank_value(t: &Template, params: &Valuation, j: usize, args: &[Int]) -> Option<Int> {
    let Shape::Rank(per_loc) = &t.shape else { return None };
    let l = match &t.locations {
        Some(locs) => locs.values.iter().position(|v| Int::from(*v) == args[locs.arg])?,
        None => 0,
    };
    let f = per_loc[l].get(j)?;
    let mut v = params.get(&t.params[f.constant].var)?.clone();
    for &(i, p) in &f.coeffs {
        v += params.get(&t.params[p].var)? * &args[i];
    }
    Some(v)
}
