//! Rewrite rules, matching under position/ban constraints, and application.

mod apply;
mod expr;
mod matcher;
mod predicate;
mod rule;
mod rule_file;

pub use apply::{apply_rule, Application, ApplyError};
pub use expr::{BinOp, Builtin, EvalEnv, EvalError, Expr, ExprParseError};
pub use matcher::{all_matches, choose_match, find_matches, verify_match, Match, MatchError, MatchMode};
pub use predicate::{compare, Bindings, Comparator, Operand, PredicateError, PropertyPredicate};
pub use rule::{
    ArrowEdge, ArrowPort, ArrowPortKind, Assignment, Pattern, Replacement, RewriteRule, RhsValue, RuleEdge,
    RuleError, RuleGraph, RuleNode, RuleParts, RulePort,
};
pub use rule_file::{parse_rules, serialize_rules, RuleFileError};

#[cfg(test)]
pub(crate) use expr::tests::FixedDraw;
