//! Core model for synchronized UAV-UGV co-planning.
//!
//! * [`scenario`] describes missions, generates random instances and builds the typed context graph.
//! * [`dynamics`] executes joint action sequences with concurrent motion, rendezvous and energy accounting.
//! * [`oracle`] solves small instances exactly and turns them into demonstration datasets.
//! * [`metaheuristics`] holds the GLS, tabu and annealing baselines that route UAVs around fixed UGV patrols.

pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod metaheuristics;
pub mod oracle;
pub mod scenario;

pub use dynamics::{Action, ExecutionTrace, JointPlan, Metrics, WorldState};
pub use error::{Error, Result};
pub use geometry::Point;
pub use scenario::{GenConfig, Scenario};
