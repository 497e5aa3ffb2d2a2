//! Exact planning for small missions and the demonstration datasets built from it.
//!
//! [`solve_exact`] runs best-first branch and bound directly over the executor's action
//! semantics, so its optimum is defined against the same dynamics every other planner is scored
//! on. [`enumerate`] is a deliberately naive brute force kept around to cross-check it.

mod bound;
mod dataset;
mod enumerate;
mod search;

pub use bound::{lower_bound, makespan_lower_bound};
pub use dataset::{build_demonstrations, generate_dataset, instance_seed, load_split, DatasetConfig, DatasetSummary, Demonstration, Split};
pub use enumerate::{enumerate, enumerate_from, Enumeration};
pub use search::{solve_exact, Budget, ExactSolution, SolveStatus};
