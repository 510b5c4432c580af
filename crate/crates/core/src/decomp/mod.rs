//! Decomposition: dependency graph, scheduling, fixpoint solving, expansion
//! and the end-to-end pipeline.

pub mod expand;
pub mod graph;
pub mod pipeline;
pub mod solve;

pub use expand::{expand, inline_calls, unroll_loops, ExpandError, Expansion};
pub use graph::{
    build_dep_graph, build_dep_graph_with, schedule, schedule_weighted, Capacity, DepEdge, DepGraph, Fixpoint, Mode,
    Schedule, SolveGroup,
};
pub use pipeline::{
    attempt, attempt_on, default_schedule, predicate_term, program_digest, run_pipeline, system_for, AnalysisReport,
    Attempt, GroupStatus, PipelineConfig, PrecondReport, Verdict,
};
pub use solve::{
    gfp_iterate, group_clauses, group_subproblem, interpretation, solve_group, GroupOutcome, SolveSettings,
};
