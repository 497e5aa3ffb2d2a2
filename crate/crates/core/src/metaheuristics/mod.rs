//! Baseline planners that only route UAVs. UGVs drive fixed nearest-neighbour patrols, UAV
//! routes get recharge stops inserted wherever energy runs short, and guided local search, tabu
//! search or simulated annealing reorder the tasks. Every candidate is costed by composing it
//! into a joint plan and running the executor.

mod neighborhood;
mod patrol;
mod routes;
mod solvers;

pub use neighborhood::{apply_move, neighborhood, Move};
pub use patrol::{fixed_ugv_route, tour_length, Patrol};
pub use routes::{Composition, RouteContext, RouteSolution, Stop};
pub use solvers::{
    features, gls_solve, metropolis_accept, sa_solve, solve, ts_solve, Feature, GlsPenalties, MetaParams, MetaResult, Method,
};

use crate::{Result, Scenario};

/// The constructive start shared by all three solvers.
pub fn initial_solution(scenario: &Scenario) -> Result<RouteSolution> {
    RouteContext::new(scenario)?.initial_solution()
}

/// Inserts recharge stops until `routes` compose into an executable plan.
pub fn repair_recharges(scenario: &Scenario, routes: &[Vec<Stop>]) -> Result<Vec<Vec<Stop>>> {
    RouteContext::new(scenario)?.repair_recharges(routes)
}
