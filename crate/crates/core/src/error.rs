use thiserror::Error;

use crate::model::Position;

/// Errors raised by model construction and the decision procedures.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("unsafe rule: variable {0} does not occur in a body atom")]
    UnsafeRule(String),
    #[error("arity mismatch for {pred}: expected {expected}, found {found}")]
    ArityMismatch {
        pred: String,
        expected: usize,
        found: usize,
    },
    #[error("labeled null {0} may not occur in a rule or dependency")]
    NullNotAllowed(String),
    #[error("rule {0} is unsatisfiable")]
    UnsatisfiableRule(String),
    #[error("invalid dependency {label}: {reason}")]
    InvalidDependency { label: String, reason: String },
    #[error("dependencies are not weakly acyclic: cycle {}", render_cycle(.0))]
    NotWeaklyAcyclic(Vec<Position>),
    #[error("chase exceeded its budget of {0} steps on one path")]
    BudgetExceeded(usize),
    #[error("query {0} has disequalities but a conjunctive query is required")]
    NotConjunctive(String),
    #[error("unknown query {0}")]
    UnknownQuery(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn render_cycle(cycle: &[Position]) -> String {
    cycle.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" -> ")
}
