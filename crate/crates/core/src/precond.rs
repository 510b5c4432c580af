//! Sufficient preconditions for termination: the weakest interval over the
//! target's inputs under which the pipeline certifies termination.

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::decomp::{attempt_on, PipelineConfig, PrecondReport, Verdict};
use crate::encode::build_constraints_for;
use crate::ir::{input_var, Program};
use crate::logic::{smt, Var};
use crate::synth::BackendFactory;
use crate::{Formula, LinExpr};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PrecondError {
    #[error("no procedure `{0}`")]
    UnknownProcedure(String),
    #[error("cannot encode `{0}`: {1}")]
    Encode(String, String),
}

/// Bounds per input: `None` is unbounded on that side.
pub type Bounds = Vec<(Option<i64>, Option<i64>)>;

#[derive(Clone, Debug)]
pub struct PrecondProblem {
    pub target: String,
    /// Interval bounds range over `[-grid, grid]`; anything beyond is unbounded.
    pub grid: i64,
    /// Point candidates tried when looking for a first certified input.
    pub seed_limit: usize,
}

impl PrecondProblem {
    pub fn new(target: &str) -> Self {
        PrecondProblem { target: target.to_string(), grid: 6, seed_limit: 64 }
    }
}

/// Conjunction of the bounds over the `in` copies of `params`.
pub fn bounds_formula(params: &[String], b: &Bounds) -> Formula {
    Formula::and(params.iter().zip(b).flat_map(|(p, &(lo, hi))| {
        let x = LinExpr::var(input_var(p));
        let lo = lo.map(|l| Formula::ge(&x, &LinExpr::int(l)));
        let hi = hi.map(|h| Formula::le(&x, &LinExpr::int(h)));
        lo.into_iter().chain(hi)
    }))
    .simplify()
}

/// Grid points ordered by distance to the origin, then lexicographically.
fn seed_points(n: usize, grid: i64, limit: usize) -> Vec<Vec<i64>> {
    let mut pts: Vec<Vec<i64>> = crate::ir::interp::box_inputs(n, -grid, grid);
    pts.sort_by_key(|p| (p.iter().map(|v| v.abs()).sum::<i64>(), p.clone()));
    pts.truncate(limit);
    pts
}

/// Weakening moves, largest gain first: drop a bound, then widen it by one.
fn moves(b: &Bounds, grid: i64) -> Vec<Bounds> {
    let mut out = Vec::new();
    for i in 0..b.len() {
        if b[i].0.is_some() {
            let mut c = b.clone();
            c[i].0 = None;
            out.push(c);
        }
        if b[i].1.is_some() {
            let mut c = b.clone();
            c[i].1 = None;
            out.push(c);
        }
    }
    for i in 0..b.len() {
        if let Some(l) = b[i].0 {
            let mut c = b.clone();
            c[i].0 = (l > -grid).then_some(l - 1);
            if c[i].0.is_some() {
                out.push(c);
            }
        }
        if let Some(h) = b[i].1 {
            let mut c = b.clone();
            c[i].1 = (h < grid).then_some(h + 1);
            if c[i].1.is_some() {
                out.push(c);
            }
        }
    }
    out
}

/// Certify-and-weaken search for the weakest sufficient interval precondition.
pub fn infer_precond(
    prog: &Program,
    problem: &PrecondProblem,
    cfg: &PipelineConfig,
    factory: &dyn BackendFactory,
) -> Result<PrecondReport, PrecondError> {
    let proc = prog.procedure(&problem.target).ok_or_else(|| PrecondError::UnknownProcedure(problem.target.clone()))?;
    let params = proc.params.clone();
    let base = build_constraints_for(prog, &problem.target)
        .map_err(|e| PrecondError::Encode(problem.target.clone(), e.to_string()))?;
    let certifies = |b: &Bounds| -> bool {
        let Ok(sys) = base.assuming(bounds_formula(&params, b)) else { return false };
        let sys = match cfg.mode {
            crate::decomp::Mode::Monolithic => sys,
            _ => match sys.split_all() {
                Ok(s) => s,
                Err(_) => return false,
            },
        };
        attempt_on(sys, cfg, factory, "precond", None).verdict == Verdict::Terminating
    };
    let first_certified = |cands: &[Bounds]| -> Option<Bounds> {
        let ok: Vec<bool> = cands.par_iter().map(&certifies).collect();
        ok.iter().position(|&x| x).map(|i| cands[i].clone())
    };
    let mut candidates = 0;
    let seeds: Vec<Bounds> = seed_points(params.len(), problem.grid, problem.seed_limit)
        .into_iter()
        .map(|p| p.into_iter().map(|v| (Some(v), Some(v))).collect())
        .collect();
    candidates += seeds.len();
    let mut current = first_certified(&seeds);
    if let Some(mut b) = current.take() {
        loop {
            let next = moves(&b, problem.grid);
            candidates += next.len();
            match first_certified(&next) {
                Some(w) => b = w,
                None => break,
            }
        }
        current = Some(b);
    }
    let rename: BTreeMap<Var, Var> = params.iter().map(|p| (input_var(p), Var::new(p))).collect();
    Ok(match current {
        Some(b) => PrecondReport {
            procedure: problem.target.clone(),
            formula: smt::term(&bounds_formula(&params, &b).rename(&rename)),
            bounds: params.iter().cloned().zip(b).collect(),
            certified: true,
            candidates,
        },
        None => PrecondReport {
            procedure: problem.target.clone(),
            formula: "false".to_string(),
            bounds: BTreeMap::new(),
            certified: false,
            candidates,
        },
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::ir::interp::{Interpreter, Limits};
    use crate::ir::parse_program;
    use crate::synth::FiniteFactory;

    fn infer(src: &str) -> PrecondReport {
        let prog = parse_program(src).unwrap();
        let cfg = PipelineConfig { timing: false, ..Default::default() };
        infer_precond(&prog, &PrecondProblem::new(&prog.entry), &cfg, &FiniteFactory { lo: -16, hi: 16 }).unwrap()
    }

    fn admits(r: &PrecondReport, var: &str, x: i64) -> bool {
        r.certified && r.bounds[var].0.is_none_or(|l| x >= l) && r.bounds[var].1.is_none_or(|h| x <= h)
    }

    /// The precondition admits exactly the terminating inputs of `[-6, 6]`.
    fn matches_interpreter(src: &str, r: &PrecondReport) -> bool {
        let prog = parse_program(src).unwrap();
        (-6..=6).all(|x| Interpreter::new(&prog, Limits::default()).run("main", &[x]).terminates() == admits(r, "x", x))
    }

    #[test]
    fn moves_drop_bounds_before_widening() {
        let b: Bounds = vec![(Some(0), Some(0)), (None, Some(6))];
        let m = moves(&b, 6);
        assert_eq!(m[0], vec![(None, Some(0)), (None, Some(6))]);
        assert_eq!(m[1], vec![(Some(0), None), (None, Some(6))]);
        assert_eq!(m[2], vec![(Some(0), Some(0)), (None, None)]);
        assert_eq!(m[3], vec![(Some(-1), Some(0)), (None, Some(6))]);
        assert_eq!(m[4], vec![(Some(0), Some(1)), (None, Some(6))]);
        assert_eq!(m.len(), 5);
    }

    #[test]
    fn seeds_start_at_the_origin() {
        let s = seed_points(2, 2, 5);
        assert_eq!(s, vec![vec![0, 0], vec![-1, 0], vec![0, -1], vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn bounds_formula_over_entry_inputs() {
        let f = bounds_formula(&["x".to_string()], &vec![(Some(-1), None)]);
        assert_eq!(f.free_vars().into_iter().collect::<Vec<_>>(), vec![input_var("x")]);
        assert!(bounds_formula(&["x".to_string()], &vec![(None, None)]).is_true());
    }

    #[test]
    fn upper_bound_precondition() {
        let src = "proc main(x) { while (x != 5) { x = x + 1; } }";
        let r = infer(src);
        assert_eq!(r.bounds["x"], (None, Some(5)));
        assert!(matches_interpreter(src, &r));
    }

    #[test]
    fn unrelated_inputs_stay_unbounded() {
        let r = infer("proc main(x, y) { while (x > y) { x = x - 1; } }");
        assert!(r.certified);
        assert_eq!(r.formula, "true");
    }

    #[test]
    fn unknown_target() {
        let prog = parse_program("proc main(x) { }").unwrap();
        let e = infer_precond(
            &prog,
            &PrecondProblem::new("f"),
            &PipelineConfig::default(),
            &FiniteFactory { lo: -4, hi: 4 },
        );
        assert_eq!(e.unwrap_err(), PrecondError::UnknownProcedure("f".into()));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn countdown_to_a_constant(c in -3i64..=3) {
            let src = format!("proc main(x) {{ while (x != {c}) {{ x = x - 1; }} }}");
            let r = infer(&src);
            prop_assert_eq!(r.bounds["x"], (Some(c), None));
            prop_assert!(matches_interpreter(&src, &r));
        }
    }
}
