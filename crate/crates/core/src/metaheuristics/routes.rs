use serde::{Deserialize, Serialize};

use super::patrol::{fixed_ugv_route, Patrol};
use crate::dynamics::{execute_plan, Action, Dynamics, JointPlan, UavStatus};
use crate::error::{Error, Result};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stop {
    Task(usize),
    /// Dock on `ugv` once its patrol brings it to `node`.
    Recharge { ugv: usize, node: usize },
}

/// UAV routes over fixed UGV patrols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteSolution {
    pub routes: Vec<Vec<Stop>>,
    /// Makespan of the composed plan as measured by the executor.
    pub makespan_s: f64,
}

impl RouteSolution {
    /// Task order of every route, recharges dropped.
    pub fn task_routes(&self) -> Vec<Vec<usize>> {
        strip(&self.routes)
    }

    pub fn recharge_count(&self) -> usize {
        self.routes.iter().flatten().filter(|s| matches!(s, Stop::Recharge { .. })).count()
    }
}

pub(crate) fn strip(routes: &[Vec<Stop>]) -> Vec<Vec<usize>> {
    routes
        .iter()
        .map(|r| {
            r.iter()
                .filter_map(|s| match s {
                    Stop::Task(m) => Some(*m),
                    Stop::Recharge { .. } => None,
                })
                .collect()
        })
        .collect()
}

fn with_tasks(routes: &[Vec<usize>]) -> Vec<Vec<Stop>> {
    routes.iter().map(|r| r.iter().map(|&m| Stop::Task(m)).collect()).collect()
}

/// Scenario data shared by every route evaluation.
pub struct RouteContext<'a> {
    pub dynamics: Dynamics<'a>,
    pub patrols: Vec<Patrol>,
    /// Candidate rendezvous `(ugv, node)` pairs in ascending order.
    pub rendezvous: Vec<(usize, usize)>,
}

impl<'a> RouteContext<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self> {
        let dynamics = Dynamics::new(scenario)?;
        let patrols = fixed_ugv_route(scenario).iter().map(|t| Patrol::new(scenario, t)).collect::<Result<Vec<_>>>()?;
        let rendezvous = patrols.iter().enumerate().flat_map(|(j, p)| p.nodes().into_iter().map(move |n| (j, n))).collect();
        Ok(Self { dynamics, patrols, rendezvous })
    }

    pub fn scenario(&self) -> &'a Scenario {
        self.dynamics.scenario
    }

    /// Turns routes into a joint plan: the UAV that is free first takes its next stop, and a
    /// recharge drives the UGV forward along its patrol until it stands on the requested node.
    pub fn compose(&self, routes: &[Vec<Stop>]) -> Composition {
        let d = &self.dynamics;
        let n_uav = routes.len();
        let mut state = d.initial_state();
        let mut hops = vec![0usize; self.patrols.len()];
        let mut next = vec![0usize; n_uav];
        let mut actions = Vec::new();
        let mut stop_end: Vec<Vec<f64>> = routes.iter().map(|r| vec![f64::NAN; r.len()]).collect();
        let fail = |uav, stop, actions, stop_end| Composition { actions, stop_end, failure: Some((uav, stop)) };
        while !state.all_visited() {
            let earliest = |pick: &dyn Fn(usize) -> bool| {
                (0..n_uav)
                    .filter(|&i| next[i] < routes[i].len() && pick(i))
                    .min_by(|&a, &b| state.uavs[a].free_at.total_cmp(&state.uavs[b].free_at).then(a.cmp(&b)))
            };
            let Some(mut i) = earliest(&|_| true) else {
                return fail(usize::MAX, 0, actions, stop_end);
            };
            // Before a UGV drives off, riders about to take off launch from where it stands and
            // UAVs about to dock on it there do so.
            if let Stop::Recharge { ugv, node } = routes[i][next[i]] {
                let here = state.ugvs[ugv].node;
                if node != here {
                    let first = earliest(&|k| {
                        let docked = state.uavs[k].status == UavStatus::Docked(ugv);
                        match routes[k][next[k]] {
                            Stop::Task(_) => docked && k != i,
                            stop => stop == Stop::Recharge { ugv, node: here } && !docked,
                        }
                    });
                    i = first.unwrap_or(i);
                }
            }
            let p = next[i];
            match routes[i][p] {
                Stop::Task(task) => {
                    let a = Action::UavVisit { uav: i, task };
                    if d.apply(&mut state, a, None).is_err() {
                        return fail(i, p, actions, stop_end);
                    }
                    actions.push(a);
                }
                Stop::Recharge { ugv, node } => {
                    let patrol = &self.patrols[ugv];
                    let mut budget = patrol.horizon();
                    while state.ugvs[ugv].node != node {
                        if budget == 0 || patrol.is_stationary_after(hops[ugv]) {
                            return fail(i, p, actions, stop_end);
                        }
                        budget -= 1;
                        let a = Action::UgvMove { ugv, node: patrol.node_at(hops[ugv] + 1) };
                        if d.apply(&mut state, a, None).is_err() {
                            return fail(i, p, actions, stop_end);
                        }
                        hops[ugv] += 1;
                        actions.push(a);
                    }
                    if state.uavs[i].status != UavStatus::Docked(ugv) {
                        let a = Action::Recharge { uav: i, ugv };
                        if d.apply(&mut state, a, None).is_err() {
                            return fail(i, p, actions, stop_end);
                        }
                        actions.push(a);
                    }
                }
            }
            stop_end[i][p] = state.uavs[i].free_at;
            next[i] += 1;
        }
        Composition { actions, stop_end, failure: None }
    }

    /// Composes and executes `routes`, returning the solution with its makespan.
    pub fn evaluate(&self, routes: Vec<Vec<Stop>>) -> Result<RouteSolution> {
        let comp = self.compose(&routes);
        if let Some((uav, stop)) = comp.failure {
            return Err(Error::NoFeasiblePlan(format!("{}: route of UAV {uav} fails at stop {stop}", self.scenario().id)));
        }
        let trace = execute_plan(self.scenario(), &JointPlan::new(comp.actions))?;
        Ok(RouteSolution { routes, makespan_s: trace.metrics().makespan_s })
    }

    pub fn plan(&self, solution: &RouteSolution) -> Result<JointPlan> {
        let comp = self.compose(&solution.routes);
        match comp.failure {
            None => Ok(JointPlan::new(comp.actions)),
            Some((uav, stop)) => Err(Error::NoFeasiblePlan(format!("route of UAV {uav} fails at stop {stop}"))),
        }
    }

    /// Makes `routes` executable by inserting recharge stops.
    ///
    /// Routes that already compose are returned unchanged. Otherwise all recharges are dropped
    /// and re-inserted one at a time: at the first stop that fails, a recharge goes in right
    /// before it at the rendezvous that finishes that stop earliest; if no rendezvous works
    /// there, earlier insertion points are tried, and then docking early and riding the UGV to a
    /// second rendezvous. If that still gets stuck, every task becomes its own sortie from the
    /// patrol node closest to it.
    pub fn repair_recharges(&self, routes: &[Vec<Stop>]) -> Result<Vec<Vec<Stop>>> {
        if self.compose(routes).failure.is_none() {
            return Ok(routes.to_vec());
        }
        let tasks = strip(routes);
        self.insert_greedily(with_tasks(&tasks)).or_else(|_| self.shuttle(&tasks))
    }

    fn insert_greedily(&self, mut routes: Vec<Vec<Stop>>) -> Result<Vec<Vec<Stop>>> {
        let limit = self.scenario().n_tasks() * 2 + 2;
        for _ in 0..=limit {
            let comp = self.compose(&routes);
            let Some((i, p)) = comp.failure else { return Ok(routes) };
            if i == usize::MAX {
                break;
            }
            match self.best_insertion(&routes, i, p) {
                Some(better) => routes = better,
                None => break,
            }
        }
        Err(Error::NoFeasiblePlan(format!("{}: no recharge insertion makes the routes executable", self.scenario().id)))
    }

    /// Fallback that works whenever every task can be served from some patrol node: the UAV
    /// rides its UGV to the patrol node closest to each task, flies there and back, and docks
    /// again before the next one.
    fn shuttle(&self, tasks: &[Vec<usize>]) -> Result<Vec<Vec<Stop>>> {
        let sc = self.scenario();
        let depot = sc.depot_node();
        let nodes = sc.road.nodes();
        let routes: Vec<Vec<Stop>> = tasks
            .iter()
            .map(|route| {
                let mut stops: Vec<Stop> = Vec::new();
                let mut push = |s: Stop| {
                    if stops.last() != Some(&s) {
                        stops.push(s);
                    }
                };
                for (k, &m) in route.iter().enumerate() {
                    let p = sc.tasks[m].position;
                    let (ugv, node) = self
                        .rendezvous
                        .iter()
                        .copied()
                        .min_by(|a, b| nodes[a.1].dist(&p).total_cmp(&nodes[b.1].dist(&p)).then(a.cmp(b)))
                        .expect("every patrol has a node");
                    if k == 0 {
                        push(Stop::Recharge { ugv, node: depot });
                    }
                    push(Stop::Recharge { ugv, node });
                    push(Stop::Task(m));
                    push(Stop::Recharge { ugv, node });
                }
                // Nothing follows the last task.
                if matches!(stops.last(), Some(Stop::Recharge { .. })) {
                    stops.pop();
                }
                stops
            })
            .collect();
        match self.compose(&routes).failure {
            None => Ok(routes),
            Some(_) => Err(Error::NoFeasiblePlan(format!("{}: no recharge insertion makes the routes executable", sc.id))),
        }
    }

    fn best_insertion(&self, routes: &[Vec<Stop>], i: usize, p: usize) -> Option<Vec<Vec<Stop>>> {
        // Single stops first; a pair docks the UAV early and lets the UGV carry it to the second node.
        let singles: Vec<Vec<Stop>> = self.rendezvous.iter().map(|&(ugv, node)| vec![Stop::Recharge { ugv, node }]).collect();
        let pairs: Vec<Vec<Stop>> = self
            .rendezvous
            .iter()
            .flat_map(|&(ugv, a)| {
                self.rendezvous
                    .iter()
                    .filter(move |&&(g, b)| g == ugv && b != a)
                    .map(move |&(_, b)| vec![Stop::Recharge { ugv, node: a }, Stop::Recharge { ugv, node: b }])
            })
            .collect();
        for group in [singles, pairs] {
            for q in (0..=p).rev() {
                if q > 0 && matches!(routes[i][q - 1], Stop::Recharge { .. }) {
                    continue;
                }
                if matches!(routes[i][q], Stop::Recharge { .. }) {
                    continue;
                }
                // Prefer insertions after which the failing stop completes, earliest first; failing
                // that, insertions that execute and leave another UAV as the first failure.
                let mut best: Option<((u8, f64), Vec<Vec<Stop>>)> = None;
                for stops in &group {
                    let mut cand = routes.to_vec();
                    cand[i].splice(q..q, stops.iter().copied());
                    let comp = self.compose(&cand);
                    let end = comp.stop_end[i][p + stops.len()];
                    let inserted_end = comp.stop_end[i][q + stops.len() - 1];
                    let rank = if comp.failure.is_none() || !end.is_nan() {
                        (0, end)
                    } else if comp.failure.is_some_and(|(k, _)| k != i) && !inserted_end.is_nan() {
                        (1, inserted_end)
                    } else {
                        continue;
                    };
                    if best.as_ref().is_none_or(|(b, _)| rank.0 < b.0 || (rank.0 == b.0 && rank.1 < b.1)) {
                        best = Some((rank, cand));
                    }
                }
                if let Some((_, cand)) = best {
                    return Some(cand);
                }
            }
        }
        None
    }

    /// Nearest-task round robin: UAVs take turns claiming the unclaimed task closest to where
    /// their route currently ends. Recharges are then inserted by [`Self::repair_recharges`].
    pub fn initial_solution(&self) -> Result<RouteSolution> {
        let sc = self.scenario();
        let n_uav = sc.fleet.n_uav;
        let mut routes: Vec<Vec<usize>> = vec![Vec::new(); n_uav];
        let mut at = vec![sc.depot; n_uav];
        let mut left: Vec<usize> = (0..sc.n_tasks()).collect();
        let mut turn = 0;
        while !left.is_empty() {
            let i = turn % n_uav;
            let (k, &m) = left
                .iter()
                .enumerate()
                .min_by(|a, b| at[i].dist(&sc.tasks[*a.1].position).total_cmp(&at[i].dist(&sc.tasks[*b.1].position)))
                .unwrap();
            left.remove(k);
            routes[i].push(m);
            at[i] = sc.tasks[m].position;
            turn += 1;
        }
        let repaired = self.repair_recharges(&with_tasks(&routes))?;
        self.evaluate(repaired)
    }

    /// Repairs and evaluates task-only routes.
    pub fn solve_routes(&self, tasks: &[Vec<usize>]) -> Result<RouteSolution> {
        self.evaluate(self.repair_recharges(&with_tasks(tasks))?)
    }
}

/// Result of composing routes into a plan.
#[derive(Debug, Clone)]
pub struct Composition {
    pub actions: Vec<Action>,
    /// Completion time of every executed stop; NaN where composition did not get to.
    pub stop_end: Vec<Vec<f64>>,
    /// First stop `(uav, index)` that could not be executed.
    pub failure: Option<(usize, usize)>,
}
