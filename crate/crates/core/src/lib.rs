//! Interprocedural termination analysis by template-based predicate synthesis.

pub mod decomp;
pub mod encode;
pub mod ir;
pub mod logic;
pub mod precond;
pub mod synth;

use num_bigint::BigInt;

/// Coefficient type used throughout the analysis.
pub type Int = BigInt;
pub type Formula = logic::Formula<Int>;
pub type LinExpr = logic::LinExpr<Int>;
pub type Valuation = logic::Valuation<Int>;
pub type Lambda = logic::Lambda<Int>;
pub type Interpretation = logic::Interpretation<Int>;
