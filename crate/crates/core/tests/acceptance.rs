//! Acceptance criteria 1 to 8, one PASS/FAIL line each.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::process::Command;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use termweave::decomp::{
    attempt, expand, group_subproblem, inline_calls, run_pipeline, unroll_loops, AnalysisReport, Expansion, Fixpoint,
    Mode, PipelineConfig, Verdict,
};
use termweave::encode::{build_constraints, callctx_symbol, Clause, ConstraintSystem, Schema};
use termweave::ir::{summary_symbol, Program};
use termweave::logic::{PredKind, Sym};
use termweave::precond::{infer_precond, PrecondProblem};
use termweave::synth::brute::valid_on_box;
use termweave::synth::{
    brute_force_solve, verify_solution, BruteLimits, FiniteFactory, PredicateSolution, Solution, TemplateConfig,
    Verification,
};
use termweave::{Formula, Interpretation, LinExpr};

use common::{corpus, outcomes, program, terminates_on_box};

/// Input box for the concrete soundness oracle.
const ORACLE_BOX: (i64, i64) = (-4, 4);
/// Total wall-clock limit for the soundness suite.
const SOUNDNESS_LIMIT: Duration = Duration::from_secs(120);
/// Round limit for the recursive fixpoint.
const GFP_ROUND_LIMIT: usize = 10;
/// Box over which fixpoint iterates are compared.
const GFP_CHECK_BOX: (i64, i64) = (-6, 6);
/// Grid and oracle box for preconditions.
const PRECOND_BOX: (i64, i64) = (-6, 6);
const MODES: [Mode; 3] = [Mode::Monolithic, Mode::Procedural, Mode::SccMin];

fn builtin() -> FiniteFactory {
    FiniteFactory { lo: -16, hi: 16 }
}

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

/// Reports of every corpus program for every mode, without and with refinement.
struct Runs {
    reports: BTreeMap<(String, Mode, bool), AnalysisReport>,
    elapsed: Duration,
}

fn run_all() -> Runs {
    let start = Instant::now();
    let jobs: Vec<(String, Program, Mode, bool)> = corpus()
        .into_iter()
        .flat_map(|(n, p)| MODES.into_iter().flat_map(move |m| [false, true].map(|r| (n.clone(), p.clone(), m, r))))
        .collect();
    let reports = jobs
        .into_par_iter()
        .map(|(name, prog, mode, refine)| {
            let cfg = PipelineConfig { mode, refine, timing: false, ..Default::default() };
            ((name, mode, refine), run_pipeline(&prog, &cfg, &builtin()))
        })
        .collect();
    Runs { reports, elapsed: start.elapsed() }
}

fn c1_soundness(runs: &Runs) -> Outcome {
    let mut certified = 0;
    let mut false_positives = Vec::new();
    let truth: BTreeMap<String, bool> =
        corpus().into_iter().map(|(n, p)| (n, terminates_on_box(&p, ORACLE_BOX.0, ORACLE_BOX.1))).collect();
    for ((name, mode, refine), r) in &runs.reports {
        if r.verdict == Verdict::Terminating {
            certified += 1;
            if !truth[name] {
                false_positives.push(format!("{name}/{}/refine={refine}", mode.name()));
            }
        }
    }
    let msg = format!(
        "{} runs, {certified} Terminating, {} false Terminating, {:.1}s",
        runs.reports.len(),
        false_positives.len(),
        runs.elapsed.as_secs_f64()
    );
    if !false_positives.is_empty() {
        return Err(format!("{msg}: {false_positives:?}"));
    }
    if runs.elapsed > SOUNDNESS_LIMIT {
        return Err(format!("{msg}: over the {}s limit", SOUNDNESS_LIMIT.as_secs()));
    }
    Ok(msg)
}

/// Procedures reachable from the entry, counted on the syntax tree.
fn reachable(prog: &Program) -> BTreeSet<String> {
    let mut seen = BTreeSet::from([prog.entry.clone()]);
    let mut work = vec![prog.entry.clone()];
    while let Some(p) = work.pop() {
        for s in &prog.procedure(&p).unwrap().call_sites {
            if seen.insert(s.callee.clone()) {
                work.push(s.callee.clone());
            }
        }
    }
    seen
}

fn c2_structure() -> Outcome {
    let mut counts = Vec::new();
    for (name, prog) in corpus() {
        let procs = reachable(&prog);
        let sites: usize = procs.iter().map(|p| prog.procedure(p).unwrap().call_sites.len()).sum();
        let sys = build_constraints(&prog).map_err(|e| e.to_string())?;
        let split = sys.split_all().map_err(|e| e.to_string())?;
        let per_proc_ok = |s: &ConstraintSystem| {
            procs.iter().all(|p| {
                [Schema::Initiation, Schema::Consecution, Schema::Exit].iter().all(|k| {
                    s.clauses.iter().filter(|c| &c.origin.procedure == p && c.origin.schema == *k).count() == 1
                })
            })
        };
        let ctx = split.clauses.iter().filter(|c| matches!(c.origin.schema, Schema::CallContext(_))).count();
        if sys.clauses.len() != 3 * procs.len()
            || split.clauses.len() != 3 * procs.len() + sites
            || ctx != sites
            || !per_proc_ok(&sys)
            || !per_proc_ok(&split)
        {
            return Err(format!(
                "{name}: {} procedures, {sites} sites, {} unsplit and {} split clauses",
                procs.len(),
                sys.clauses.len(),
                split.clauses.len()
            ));
        }
        counts.push(format!("{name}={}+{sites}", 3 * procs.len()));
    }
    Ok(counts.join(" "))
}

fn c3_oracle() -> Outcome {
    let template = TemplateConfig { const_bound: 2, coeff_bound: 1, ..Default::default() };
    let factory = FiniteFactory { lo: -4, hi: 4 };
    let limits = BruteLimits { max_grid: 20_000, max_ground: 2_000_000 };
    let (mut agree, mut skipped) = (0, 0);
    let mut disagreements = Vec::new();
    for (name, prog) in corpus() {
        for mode in MODES {
            let cfg = PipelineConfig { mode, template, timing: false, ..Default::default() };
            let a = attempt(&prog, &cfg, &factory, "oracle", None);
            let (Some(sys), Some(s)) = (&a.system, &a.schedule) else { continue };
            for (j, grp) in s.groups.iter().enumerate() {
                let Some(out) = &a.outcomes[j] else { continue };
                if grp.fixpoint != Fixpoint::None {
                    continue;
                }
                let known: Solution = s.groups[..j]
                    .iter()
                    .flat_map(|g| g.predicates.iter())
                    .filter_map(|p| a.solution.get(p).map(|v| (p.clone(), v.clone())))
                    .collect();
                let sp = group_subproblem(sys, &grp.predicates, grp.objective, &known, &template);
                match brute_force_solve(&sp, -4, 4, limits) {
                    Ok(b) if b.solved == out.solved => agree += 1,
                    Ok(b) => disagreements.push(format!(
                        "{name}/{}/group {j}: cegis {} oracle {}",
                        mode.name(),
                        out.solved,
                        b.solved
                    )),
                    Err(_) => skipped += 1,
                }
            }
        }
    }
    let msg = format!("{agree} groups agree, {} disagree, {skipped} beyond the oracle's limits", disagreements.len());
    if disagreements.is_empty() && agree > 0 {
        Ok(msg)
    } else {
        Err(format!("{msg}: {disagreements:?}"))
    }
}

/// Monolithic clauses of the decomposed run's program under its solution,
/// with `Summary` read as `Sum` and split callees restricted to their calling contexts.
fn recombined(report: &AnalysisReport) -> Option<(Vec<Clause>, Solution)> {
    let split = report.system.as_ref()?;
    let mono = build_constraints(&split.program).ok()?;
    let mut sol = report.solution.clone();
    for (s, p) in &report.solution {
        if s.kind == PredKind::Sum {
            let summary = summary_symbol(split.procedure(&s.owner));
            sol.insert(summary.clone(), PredicateSolution::from_formula(summary, p.formula.clone()));
        }
    }
    let clauses = mono
        .clauses
        .iter()
        .map(|c| {
            let name = &c.origin.procedure;
            if !split.split.contains(name) || !matches!(c.origin.schema, Schema::Initiation | Schema::Exit) {
                return c.clone();
            }
            let t = split.iots(name);
            let inputs: Vec<LinExpr> = t.input_vars.iter().map(|v| LinExpr::var(v.clone())).collect();
            let mut options: Vec<Formula> = split
                .sites_of(name)
                .iter()
                .map(|(caller, site)| {
                    Formula::app(callctx_symbol(split.procedure(name), caller, *site), inputs.clone())
                })
                .collect();
            if *name == split.entry {
                options.push(split.entry_assumption.clone());
            }
            Clause { body: Formula::and([c.body.clone(), Formula::or(options)]), ..c.clone() }
        })
        .collect();
    Some((clauses, sol))
}

fn c4_recombination(runs: &Runs) -> Outcome {
    let box4 = FiniteFactory { lo: -4, hi: 4 };
    let (mut runs_checked, mut clauses_checked, mut exhaustive) = (0, 0, 0);
    let mut violations = Vec::new();
    for ((name, mode, refine), r) in &runs.reports {
        if *mode == Mode::Monolithic || r.verdict != Verdict::Terminating {
            continue;
        }
        let tag = format!("{name}/{}/refine={refine}", mode.name());
        let Some((clauses, sol)) = recombined(r) else {
            violations.push(format!("{tag}: no system"));
            continue;
        };
        runs_checked += 1;
        match verify_solution(&clauses, &Interpretation::new(), &sol, &box4) {
            Ok(Verification::Certificate) => {}
            other => violations.push(format!("{tag}: {other:?}")),
        }
        let interp: Interpretation = sol.iter().map(|(s, p)| (Sym::clone(s), p.formula.clone())).collect();
        for c in &clauses {
            clauses_checked += 1;
            if c.vars().len() <= 6 {
                exhaustive += 1;
                let f = termweave::logic::expand_apps(&c.formula(), &interp);
                if !valid_on_box(&f, -4, 4) {
                    violations.push(format!("{tag}: clause {:?} fails by enumeration", c.origin));
                }
            }
        }
    }
    let msg = format!(
        "{runs_checked} decomposed Terminating runs, {clauses_checked} clauses ({exhaustive} also enumerated), {} violations",
        violations.len()
    );
    if violations.is_empty() && runs_checked > 0 {
        Ok(msg)
    } else {
        Err(format!("{msg}: {violations:?}"))
    }
}

fn c5_gfp(runs: &Runs) -> Outcome {
    let key = |m: Mode| ("05_recursion".to_string(), m, false);
    let proc_run = &runs.reports[&key(Mode::Procedural)];
    if proc_run.gfp_traces.is_empty() {
        return Err("procedural run of 05_recursion has no fixpoint block".into());
    }
    for (g, trace) in &proc_run.gfp_traces {
        let rounds = trace.len() - 1;
        if rounds > GFP_ROUND_LIMIT || trace[rounds] != trace[rounds.saturating_sub(1)] {
            return Err(format!("block {g} did not stabilize within {GFP_ROUND_LIMIT} rounds"));
        }
        for w in trace.windows(2) {
            for (s, next) in &w[1] {
                let prev = &w[0][s];
                let args: Vec<LinExpr> =
                    (0..s.arity).map(|i| LinExpr::var(termweave::logic::Var::new(format!("a{i}")))).collect();
                let f = Formula::implies(next.formula.apply(&args), prev.formula.apply(&args));
                if !valid_on_box(&f, GFP_CHECK_BOX.0, GFP_CHECK_BOX.1) {
                    return Err(format!("block {g}: iterate of {} is not below its predecessor", s.name()));
                }
            }
        }
    }
    let mono = runs.reports[&key(Mode::Monolithic)].verdict;
    let mut loss = Vec::new();
    let mut alarms = Vec::new();
    for ((name, mode, refine), r) in &runs.reports {
        if *mode == Mode::Monolithic {
            continue;
        }
        let m = runs.reports[&(name.clone(), Mode::Monolithic, *refine)].verdict;
        match (m, r.verdict) {
            (Verdict::Terminating, Verdict::Unknown) => loss.push(format!("{name}/{}/refine={refine}", mode.name())),
            (Verdict::Unknown, Verdict::Terminating) => alarms.push(format!("{name}/{}/refine={refine}", mode.name())),
            _ => {}
        }
    }
    let rounds: Vec<usize> = proc_run.gfp_traces.values().map(|t| t.len() - 1).collect();
    let shown = mono == Verdict::Terminating && proc_run.verdict == Verdict::Unknown;
    let msg = format!("rounds {rounds:?}, precision loss {loss:?}, soundness alarms {alarms:?}");
    if shown && alarms.is_empty() {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c6_precond() -> Outcome {
    let cfg = PipelineConfig { timing: false, ..Default::default() };
    let mut lines = Vec::new();
    for (stem, expected) in [("09_conditional", "x >= 0"), ("07_forever", "false"), ("01_countdown", "true")] {
        let prog = program(stem);
        let p = infer_precond(&prog, &PrecondProblem::new(&prog.entry), &cfg, &builtin()).map_err(|e| e.to_string())?;
        let got = match (p.certified, p.bounds.get("x")) {
            (false, _) => "false".to_string(),
            (true, Some((None, None))) => "true".to_string(),
            (true, Some((Some(l), None))) => format!("x >= {l}"),
            (true, b) => format!("{b:?}"),
        };
        if got != expected {
            return Err(format!("{stem}: inferred {got}, expected {expected}"));
        }
        let admitted = |x: i64| match p.bounds.get("x") {
            Some((lo, hi)) => p.certified && lo.is_none_or(|l| x >= l) && hi.is_none_or(|h| x <= h),
            None => false,
        };
        for (input, o) in outcomes(&prog, PRECOND_BOX.0, PRECOND_BOX.1) {
            let x = input[0];
            if stem == "09_conditional" && admitted(x) != o.terminates() {
                return Err(format!("{stem}: precondition and interpreter disagree at x = {x}"));
            }
            if admitted(x) && !o.terminates() {
                return Err(format!("{stem}: admits diverging input x = {x}"));
            }
        }
        lines.push(format!("{stem}: {got}"));
    }
    Ok(lines.join(", "))
}

fn c7_expansion(runs: &Runs) -> Outcome {
    let mut checked = 0;
    for (name, prog) in corpus() {
        let base = outcomes(&prog, ORACLE_BOX.0, ORACLE_BOX.1);
        let mut variants: Vec<(String, Program)> = Vec::new();
        for k in 1..=3 {
            variants.push((format!("unroll all {k}"), unroll_loops(&prog, k)));
            for p in &prog.procedures {
                for id in 1..=p.loop_count() {
                    let act = Expansion::Unroll { procedure: p.name.clone(), loop_id: id, k };
                    variants.push((format!("{act:?}"), expand(&prog, &act).map_err(|e| e.to_string())?));
                }
            }
        }
        for d in 1..=2 {
            variants.push((format!("inline all {d}"), inline_calls(&prog, d)));
            for p in &prog.procedures {
                for s in &p.call_sites {
                    let act = Expansion::Inline { caller: p.name.clone(), site: s.id, depth: d };
                    variants.push((format!("{act:?}"), expand(&prog, &act).map_err(|e| e.to_string())?));
                }
            }
        }
        for (label, v) in variants {
            if outcomes(&v, ORACLE_BOX.0, ORACLE_BOX.1) != base {
                return Err(format!("{name}: {label} changes interpreter results"));
            }
            checked += 1;
        }
    }
    let mut flips = Vec::new();
    for (stem, how) in [("10_unroll", "unroll 1"), ("11_inline", "inline 1")] {
        for mode in MODES {
            let before = runs.reports[&(stem.to_string(), mode, false)].verdict;
            let after = &runs.reports[&(stem.to_string(), mode, true)];
            if before != Verdict::Unknown || after.verdict != Verdict::Terminating || after.decided_by != how {
                return Err(format!(
                    "{stem}/{}: {before:?} then {:?} by {}",
                    mode.name(),
                    after.verdict,
                    after.decided_by
                ));
            }
        }
        flips.push(format!("{stem} by {how}"));
    }
    Ok(format!("{checked} expansions preserve I/O; Unknown to Terminating: {}", flips.join(", ")))
}

fn c8_determinism() -> Outcome {
    let run = |jobs: &str| {
        Command::new(env!("CARGO_BIN_EXE_termweave"))
            .args(["analyze", "--mode", "procedural", "--mode", "scc-min", "--refine", "--no-timing", "--jobs", jobs])
            .arg(common::corpus_dir())
            .output()
            .map_err(|e| e.to_string())
    };
    let a = run("1")?;
    let b = run("4")?;
    if a.stdout.is_empty() {
        return Err(format!("empty report: {}", String::from_utf8_lossy(&a.stderr)));
    }
    if a.stdout != b.stdout {
        return Err("reports differ between runs".into());
    }
    Ok(format!("{} identical bytes across two runs", a.stdout.len()))
}

fn main() {
    let runs = run_all();
    let criteria: Vec<Criterion> = vec![
        ("soundness", Box::new(|| c1_soundness(&runs))),
        ("clause structure", Box::new(c2_structure)),
        ("oracle equivalence", Box::new(c3_oracle)),
        ("recombination", Box::new(|| c4_recombination(&runs))),
        ("gfp behaviour", Box::new(|| c5_gfp(&runs))),
        ("precondition inference", Box::new(c6_precond)),
        ("expansion semantics", Box::new(|| c7_expansion(&runs))),
        ("determinism", Box::new(c8_determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(msg) => println!("PASS {} {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {} {name}: {msg}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
