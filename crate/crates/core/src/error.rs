use thiserror::Error;

use crate::dynamics::InfeasibleReason;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid scenario: {0}")]
    Validation(String),

    #[error("failed to parse {path}: {message}")]
    Parse { path: String, message: String },

    #[error("road nodes {from} and {to} are not connected")]
    Unreachable { from: usize, to: usize },

    #[error("infeasible plan at step {step}: {reason}")]
    InfeasiblePlan { step: usize, reason: InfeasibleReason },

    #[error("no feasible plan exists for scenario {0}")]
    NoFeasiblePlan(String),

    #[error("search budget exhausted before any feasible plan was found")]
    BudgetExhausted,

    #[error("dataset generation aborted: {exhausted} of {total} instances exhausted the search budget")]
    TooManyExhausted { exhausted: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
