//! Program representation: parsing, lowering to transition systems, and a
//! reference interpreter.

mod ast;
pub mod interp;
mod lower;
mod parse;
mod pretty;

pub use ast::{CallSite, CmpOp, Cond, Pos, Procedure, Program, Stmt};
pub use lower::{
    ghost_var, input_var, io_roles, lower_procedure, lower_program, lower_to_iots, output_var, recursive_components,
    summary_symbol, Iots, LowerOptions, Placeholder, Segment,
};
pub use parse::{parse_program, validate};
pub use pretty::{procedure_to_string, program_to_string};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum IrError {
    #[error("{pos}: syntax error: expected {expected}, found {found}")]
    Syntax { pos: Pos, expected: String, found: String },
    #[error("{pos}: call to unknown procedure `{name}`")]
    UnresolvedCallee { pos: Pos, name: String },
    #[error("{pos}: call to `{callee}` has {got} {what}, expected {expected}")]
    Arity { pos: Pos, callee: String, what: &'static str, expected: usize, got: usize },
    #[error("{pos}: duplicate {what}")]
    Duplicate { pos: Pos, what: String },
    #[error("procedure `{procedure}` reads undeclared variable `{var}`")]
    Undeclared { procedure: String, var: String },
    #[error("{pos}: unsupported construct: {what}")]
    Unsupported { pos: Pos, what: String },
}
