use crate::dynamics::{Dynamics, WorldState};
use crate::scenario::Scenario;

/// Lower bound on the final makespan reachable from `state`, in absolute time.
///
/// Three relaxations, each ignoring energy and synchronization:
/// * the makespan never decreases, so it is at least the current clock;
/// * every unvisited task needs some UAV to fly to it, no faster than straight from that UAV;
/// * every unvisited task has an incoming flight leg starting at a UAV, a road node or another
///   unvisited task; the cheapest such legs are shared among the UAVs at best evenly.
pub fn makespan_lower_bound(dynamics: &Dynamics<'_>, state: &WorldState) -> f64 {
    if state.all_visited() {
        return state.clock;
    }
    let sc = dynamics.scenario;
    let speed = dynamics.uav_speed;
    let mut reach = 0.0f64;
    let mut legs = 0.0;
    for m in state.unvisited() {
        let p = sc.tasks[m].position;
        let first = state.uavs.iter().map(|u| u.free_at + u.pos.dist(&p) / speed).fold(f64::INFINITY, f64::min);
        reach = reach.max(first);
        let mut incoming = state.uavs.iter().map(|u| u.pos.dist(&p)).fold(f64::INFINITY, f64::min);
        incoming = sc.road.nodes().iter().map(|n| n.dist(&p)).fold(incoming, f64::min);
        for k in state.unvisited() {
            if k != m {
                incoming = incoming.min(sc.tasks[k].position.dist(&p));
            }
        }
        legs += incoming / speed;
    }
    let busy: f64 = state.uavs.iter().map(|u| u.free_at).sum();
    let shared = (busy + legs) / state.uavs.len() as f64;
    state.clock.max(reach).max(shared)
}

/// Lower bound on the makespan still to come from `state`: zero once every task is visited.
pub fn lower_bound(scenario: &Scenario, state: &WorldState) -> crate::Result<f64> {
    let dynamics = Dynamics::new(scenario)?;
    Ok(makespan_lower_bound(&dynamics, state) - state.clock)
}
