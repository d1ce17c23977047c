//! Strategy language: parsing, printing and interpretation against a derivation tree.

mod interp;
mod program;

pub use interp::{
    commit_selection, AppliedStep, Interpreter, RuleLibrary, RunOptions, Status, StrategyError, StrategyOutcome,
    DEFAULT_STEP_BUDGET,
};
pub use program::{Filter, Instruction, StrategyParseError, StrategyProgram};
