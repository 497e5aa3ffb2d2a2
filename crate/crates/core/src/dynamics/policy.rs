//! A greedy completion policy. It only looks at the current state, so it can be used to finish
//! any partial plan: as an upper bound for the exact search and as a safety net while decoding.
//!
//! The policy is more cautious than the executor's reserve rule. It only flies a visit if the UAV
//! can afterwards still dock on some UGV where that UGV stands now, hover time included, and it
//! only drives a UGV if no airborne UAV loses its last such option.

use super::{Action, Dynamics, UavStatus, WorldState};

pub struct GreedyPolicy<'d, 'a> {
    dynamics: &'d Dynamics<'a>,
    road_dist: Vec<Vec<f64>>,
    /// Nearest road node of every task.
    task_node: Vec<usize>,
    max_steps: usize,
}

impl<'d, 'a> GreedyPolicy<'d, 'a> {
    pub fn new(dynamics: &'d Dynamics<'a>) -> Self {
        let sc = dynamics.scenario;
        let task_node = sc.tasks.iter().map(|t| nearest_node(dynamics, &t.position)).collect();
        let max_steps = 4 * (sc.n_tasks() + 1) * (sc.n_nodes() + 1) * (sc.fleet.n_uav + 1);
        Self { dynamics, road_dist: sc.road.distance_matrix(), task_node, max_steps }
    }

    /// The action the policy takes in `state`, or `None` if it is stuck.
    pub fn step(&self, state: &WorldState) -> Option<Action> {
        if state.all_visited() {
            return None;
        }
        let mut order: Vec<usize> = (0..state.uavs.len()).collect();
        order.sort_by(|&a, &b| state.uavs[a].free_at.total_cmp(&state.uavs[b].free_at).then(a.cmp(&b)));
        order.into_iter().find_map(|uav| self.step_for(state, uav))
    }

    fn step_for(&self, state: &WorldState, uav: usize) -> Option<Action> {
        let d = self.dynamics;
        let sc = d.scenario;
        let u = &state.uavs[uav];
        let visit = state
            .unvisited()
            .filter(|&task| {
                let mut next = state.clone();
                d.apply(&mut next, Action::UavVisit { uav, task }, None).is_ok() && (next.all_visited() || self.can_dock(&next, uav))
            })
            .min_by(|&a, &b| u.pos.dist(&sc.tasks[a].position).total_cmp(&u.pos.dist(&sc.tasks[b].position)));
        if let Some(task) = visit {
            return Some(Action::UavVisit { uav, task });
        }
        if let UavStatus::Docked(ugv) = u.status {
            // Full battery and nothing in range: carry the UAV toward the closest task by road.
            let here = state.ugvs[ugv].node;
            let goal = state
                .unvisited()
                .map(|t| self.task_node[t])
                .min_by(|&a, &b| self.road_dist[here][a].total_cmp(&self.road_dist[here][b]).then(a.cmp(&b)))?;
            if goal == here {
                return None;
            }
            return self.hop_toward(state, ugv, goal);
        }
        let target = state
            .unvisited()
            .min_by(|&a, &b| u.pos.dist(&sc.tasks[a].position).total_cmp(&u.pos.dist(&sc.tasks[b].position)))?;
        let goal = self.task_node[target];
        let cost = |ugv: usize| {
            let g = &state.ugvs[ugv];
            d.flight_time(&u.pos, &g.pos).max(g.free_at - u.free_at) + self.road_dist[g.node][goal] / d.ugv_speed
        };
        let dock = (0..state.ugvs.len())
            .filter(|&ugv| d.check(state, Action::Recharge { uav, ugv }).is_ok())
            .min_by(|&a, &b| cost(a).total_cmp(&cost(b)).then(a.cmp(&b)));
        if let Some(ugv) = dock {
            return Some(Action::Recharge { uav, ugv });
        }
        // No UGV reachable: bring the closest one toward the UAV.
        let near = nearest_node(d, &u.pos);
        let ugv = (0..state.ugvs.len())
            .filter(|&j| state.ugvs[j].node != near)
            .min_by(|&a, &b| {
                self.road_dist[state.ugvs[a].node][near].total_cmp(&self.road_dist[state.ugvs[b].node][near]).then(a.cmp(&b))
            })?;
        self.hop_toward(state, ugv, near)
    }

    fn hop_toward(&self, state: &WorldState, ugv: usize, goal: usize) -> Option<Action> {
        let here = state.ugvs[ugv].node;
        let road = &self.dynamics.scenario.road;
        let next = road
            .neighbors(here)
            .iter()
            .filter(|(n, len)| (len + self.road_dist[*n][goal] - self.road_dist[here][goal]).abs() <= 1e-9 * (1.0 + self.road_dist[here][goal]))
            .map(|&(n, _)| n)
            .min()?;
        let a = Action::UgvMove { ugv, node: next };
        let mut after = state.clone();
        self.dynamics.apply(&mut after, a, None).ok()?;
        let stranded = (0..state.uavs.len())
            .any(|u| !matches!(state.uavs[u].status, UavStatus::Docked(_)) && self.can_dock(state, u) && !self.can_dock(&after, u));
        (!stranded).then_some(a)
    }

    fn can_dock(&self, state: &WorldState, uav: usize) -> bool {
        matches!(state.uavs[uav].status, UavStatus::Docked(_))
            || (0..state.ugvs.len()).any(|ugv| self.dynamics.check(state, Action::Recharge { uav, ugv }).is_ok())
    }

    /// Runs the policy from `state` until every task is visited. Returns the appended actions and
    /// the final state, or `None` if the policy gets stuck or loops.
    pub fn complete(&self, state: &WorldState) -> Option<(Vec<crate::dynamics::Action>, WorldState)> {
        let mut s = state.clone();
        let mut actions = Vec::new();
        while !s.all_visited() {
            if actions.len() >= self.max_steps {
                return None;
            }
            let a = self.step(&s)?;
            self.dynamics.apply(&mut s, a, None).ok()?;
            actions.push(a);
        }
        Some((actions, s))
    }
}

fn nearest_node(d: &Dynamics<'_>, p: &crate::geometry::Point) -> usize {
    d.scenario
        .road
        .nodes()
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.dist(p).total_cmp(&b.1.dist(p)).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .unwrap_or(0)
}
