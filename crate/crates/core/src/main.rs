use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use termweave::decomp::{run_pipeline, AnalysisReport, Mode, PipelineConfig, Verdict};
use termweave::ir::{parse_program, Program};
use termweave::precond::{infer_precond, PrecondProblem};
use termweave::synth::{BackendFactory, Domain, FiniteFactory, Ranking, SmtLibFactory};

#[derive(Parser)]
#[command(name = "termweave", version, about = "Interprocedural termination analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze programs (files or directories of `.tw` files).
    Analyze(AnalyzeArgs),
}

#[derive(clap::Args)]
struct AnalyzeArgs {
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    /// monolithic, procedural or scc-min; repeatable.
    #[arg(long = "mode")]
    modes: Vec<Mode>,
    /// Maximum predicates per solve group.
    #[arg(long, default_value_t = 4)]
    capacity: usize,
    /// interval or polyhedra.
    #[arg(long, default_value = "interval")]
    domain: String,
    /// linear or lex:K.
    #[arg(long, default_value = "linear")]
    ranking: String,
    /// `builtin` or the path of an SMT-LIB2 solver; falls back to TERMWEAVE_SOLVER.
    #[arg(long)]
    backend: Option<String>,
    /// Variable box of the builtin backend.
    #[arg(long = "box", num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    bounds: Option<Vec<i64>>,
    #[arg(long, default_value_t = 200)]
    budget_iters: usize,
    #[arg(long, default_value_t = 30)]
    budget_secs: u64,
    /// Retry Unknown results with re-composition, unrolling and inlining.
    #[arg(long)]
    refine: bool,
    #[arg(long, default_value_t = 1)]
    max_unroll: usize,
    #[arg(long, default_value_t = 1)]
    max_inline: usize,
    /// Infer a sufficient precondition for this procedure.
    #[arg(long)]
    precond: Option<String>,
    /// Compare modes and emit one row per (program, mode).
    #[arg(long)]
    compare: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Omit wall-clock timings from the report.
    #[arg(long)]
    no_timing: bool,
    /// Programs analyzed concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Shifts the counterexample proposal order.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Serialize)]
struct CompareRow {
    program: String,
    mode: Option<Mode>,
    verdict: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_ms: Option<u64>,
    groups: usize,
    cegis_iters: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct Finding {
    program: String,
    mode: Mode,
}

#[derive(Serialize)]
struct Comparison {
    rows: Vec<CompareRow>,
    soundness_alarms: Vec<Finding>,
    precision_loss: Vec<Finding>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let Command::Analyze(args) = cli.command;
    match analyze(&args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn parse_ranking(s: &str) -> Result<Ranking> {
    if s == "linear" {
        return Ok(Ranking::Linear);
    }
    match s.strip_prefix("lex:").map(str::parse::<usize>) {
        Some(Ok(k)) if k >= 1 => Ok(Ranking::Lexicographic(k)),
        _ => bail!("unknown ranking `{s}` (expected linear or lex:K with K >= 1)"),
    }
}

fn config(args: &AnalyzeArgs, mode: Mode) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig { mode, refine: args.refine, timing: !args.no_timing, ..Default::default() };
    if args.capacity == 0 {
        bail!("--capacity must be at least 1");
    }
    cfg.capacity.max_predicates = args.capacity;
    cfg.template.domain = match args.domain.as_str() {
        "interval" => Domain::Interval,
        "polyhedra" => Domain::Polyhedra,
        d => bail!("unknown domain `{d}` (expected interval or polyhedra)"),
    };
    cfg.template.ranking = parse_ranking(&args.ranking)?;
    cfg.budget.iters = args.budget_iters;
    cfg.budget.time = Duration::from_secs(args.budget_secs);
    cfg.budget.seed = args.seed;
    cfg.max_unroll = args.max_unroll;
    cfg.max_inline = args.max_inline;
    Ok(cfg)
}

fn factory(args: &AnalyzeArgs) -> Result<Box<dyn BackendFactory>> {
    let choice = args.backend.clone().or_else(|| std::env::var("TERMWEAVE_SOLVER").ok());
    match choice.as_deref() {
        None | Some("builtin") => {
            let (lo, hi) = match args.bounds.as_deref() {
                Some([lo, hi]) => (*lo, *hi),
                _ => (-16, 16),
            };
            if lo > hi {
                bail!("--box {lo} {hi} is empty");
            }
            Ok(Box::new(FiniteFactory { lo, hi }))
        }
        Some(path) => {
            let p = PathBuf::from(path);
            let found = p.is_file() || (p.components().count() == 1 && which(&p).is_some());
            if !found {
                bail!("backend `{path}` not found");
            }
            Ok(Box::new(SmtLibFactory { path: p }))
        }
    }
}

fn which(name: &Path) -> Option<PathBuf> {
    std::env::var_os("PATH").and_then(|paths| std::env::split_paths(&paths).map(|d| d.join(name)).find(|c| c.is_file()))
}

/// Files named on the command line, and the `.tw` files of named directories, sorted.
fn collect(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("cannot read {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "tw"))
                .collect();
            files.sort();
            out.extend(files);
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            bail!("no such file or directory: {}", p.display());
        }
    }
    Ok(out)
}

fn load(path: &Path) -> Result<Program> {
    let src = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_program(&src).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

fn label(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn analyze_one(
    prog: &Program,
    cfg: &PipelineConfig,
    f: &dyn BackendFactory,
    precond: Option<&str>,
) -> Result<AnalysisReport> {
    let mut report = run_pipeline(prog, cfg, f);
    if let Some(target) = precond {
        let pre = infer_precond(prog, &PrecondProblem::new(target), cfg, f)?;
        report.preconditions.insert(target.to_string(), pre);
    }
    Ok(report)
}

fn emit(args: &AnalyzeArgs, json: &str) -> Result<()> {
    match &args.out {
        Some(p) => std::fs::write(p, format!("{json}\n")).with_context(|| format!("cannot write {}", p.display())),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn analyze(args: &AnalyzeArgs) -> Result<u8> {
    let modes = if args.modes.is_empty() {
        if args.compare {
            vec![Mode::Monolithic, Mode::Procedural, Mode::SccMin]
        } else {
            vec![Mode::Procedural]
        }
    } else {
        args.modes.clone()
    };
    let configs: Vec<PipelineConfig> = modes.iter().map(|&m| config(args, m)).collect::<Result<_>>()?;
    let f = factory(args)?;
    let files = collect(&args.paths)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs.max(1)).build()?;
    if args.compare {
        let cmp = pool.install(|| compare(&files, &configs, f.as_ref()));
        emit(args, &serde_json::to_string_pretty(&cmp)?)?;
        return Ok(if cmp.soundness_alarms.is_empty() { 0 } else { 1 });
    }
    let programs: Vec<(PathBuf, Program)> = files.iter().map(|p| Ok((p.clone(), load(p)?))).collect::<Result<_>>()?;
    if let Some(t) = &args.precond {
        if !programs.iter().any(|(_, p)| p.procedure(t).is_some()) {
            bail!("no analyzed program has a procedure `{t}`");
        }
    }
    let jobs: Vec<(&Program, &PipelineConfig)> =
        programs.iter().flat_map(|(_, p)| configs.iter().map(move |c| (p, c))).collect();
    let reports: Vec<AnalysisReport> = pool.install(|| {
        jobs.par_iter()
            .map(|(p, c)| {
                let target = args.precond.as_deref().filter(|t| p.procedure(t).is_some());
                analyze_one(p, c, f.as_ref(), target)
            })
            .collect::<Result<_>>()
    })?;
    let json = if reports.len() == 1 {
        serde_json::to_string_pretty(&reports[0])?
    } else {
        serde_json::to_string_pretty(&reports)?
    };
    emit(args, &json)?;
    Ok(if reports.iter().all(|r| r.verdict == Verdict::Terminating) { 0 } else { 10 })
}

fn compare(files: &[PathBuf], configs: &[PipelineConfig], f: &dyn BackendFactory) -> Comparison {
    let per_file: Vec<Vec<CompareRow>> = files
        .par_iter()
        .map(|path| {
            let name = label(path);
            let prog = match load(path) {
                Ok(p) => p,
                Err(e) => {
                    return vec![CompareRow {
                        program: name,
                        mode: None,
                        verdict: None,
                        wall_ms: None,
                        groups: 0,
                        cegis_iters: 0,
                        error: Some(format!("{e:#}")),
                    }]
                }
            };
            configs
                .iter()
                .map(|cfg| {
                    let r = run_pipeline(&prog, cfg, f);
                    CompareRow {
                        program: name.clone(),
                        mode: Some(cfg.mode),
                        verdict: Some(r.verdict),
                        wall_ms: r.wall_ms,
                        groups: r.attempts.first().map_or(0, |a| a.groups.len()),
                        cegis_iters: r.cegis_iters,
                        error: None,
                    }
                })
                .collect()
        })
        .collect();
    let rows: Vec<CompareRow> = per_file.into_iter().flatten().collect();
    let mut soundness_alarms = Vec::new();
    let mut precision_loss = Vec::new();
    for mono in rows.iter().filter(|r| r.mode == Some(Mode::Monolithic)) {
        for r in rows.iter().filter(|r| r.program == mono.program && r.mode.is_some_and(|m| m != Mode::Monolithic)) {
            let finding = Finding { program: r.program.clone(), mode: r.mode.expect("mode") };
            match (mono.verdict, r.verdict) {
                (Some(Verdict::Unknown), Some(Verdict::Terminating)) => soundness_alarms.push(finding),
                (Some(Verdict::Terminating), Some(Verdict::Unknown)) => precision_loss.push(finding),
                _ => {}
            }
        }
    }
    Comparison { rows, soundness_alarms, precision_loss }
}
