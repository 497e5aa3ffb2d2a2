//! Event-driven execution of joint plans.
//!
//! A joint plan is a single ordered token sequence, but every robot keeps its own timeline:
//! an action starts when the robot it belongs to is free, so UAV and UGV subsequences run
//! concurrently. A recharge couples one UAV and one UGV at the UGV's current road node; it
//! starts when both have arrived and the earlier arrival waits. Validity of an action only
//! looks at the robots it involves, so interleaving independent actions differently never
//! changes whether a plan is accepted.

mod action;
mod energy;
pub mod policy;
mod state;
mod trace;

use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::scenario::Scenario;

pub use action::{Action, JointPlan};
pub use energy::{uav_power, ugv_power, EnergyModelParams, MAX_UAV_SPEED_MPS};
pub use state::{RobotId, UavState, UavStatus, UgvState, WorldState};
pub use trace::{metrics, parse_event_log, Event, EventKind, ExecutionTrace, Metrics, Rendezvous, TraceLog};

/// Why an action cannot be applied.
#[derive(Debug, Clone, PartialEq)]
pub enum InfeasibleReason {
    UnknownUav(usize),
    UnknownUgv(usize),
    UnknownTask(usize),
    UnknownNode(usize),
    MissionComplete,
    TaskAlreadyVisited(usize),
    UavEnergy { uav: usize, needed_j: f64, available_j: f64 },
    Reserve { uav: usize, task: usize, remaining_j: f64, reserve_j: f64 },
    NotAdjacent { ugv: usize, from: usize, to: usize },
    UgvEnergy { ugv: usize, needed_j: f64, available_j: f64 },
    AlreadyDocked { uav: usize, ugv: usize },
    Incomplete { unvisited: Vec<usize> },
    EmptyPlan,
}

impl fmt::Display for InfeasibleReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use InfeasibleReason::*;
        match self {
            UnknownUav(i) => write!(f, "UAV {i} does not exist"),
            UnknownUgv(i) => write!(f, "UGV {i} does not exist"),
            UnknownTask(i) => write!(f, "task {i} does not exist"),
            UnknownNode(i) => write!(f, "road node {i} does not exist"),
            MissionComplete => write!(f, "all tasks are already visited"),
            TaskAlreadyVisited(t) => write!(f, "task {t} is visited twice"),
            UavEnergy { uav, needed_j, available_j } => {
                write!(f, "UAV {uav} needs {needed_j:.1} J but has {available_j:.1} J")
            }
            Reserve { uav, task, remaining_j, reserve_j } => write!(
                f,
                "UAV {uav} would be left with {remaining_j:.1} J after task {task}, below the {reserve_j:.1} J needed to reach a road node"
            ),
            NotAdjacent { ugv, from, to } => write!(f, "UGV {ugv} cannot drive from node {from} to non-adjacent node {to}"),
            UgvEnergy { ugv, needed_j, available_j } => {
                write!(f, "UGV {ugv} needs {needed_j:.1} J but has {available_j:.1} J")
            }
            AlreadyDocked { uav, ugv } => write!(f, "UAV {uav} is already docked on UGV {ugv}"),
            Incomplete { unvisited } => write!(f, "plan ends with unvisited tasks {unvisited:?}"),
            EmptyPlan => write!(f, "plan is empty"),
        }
    }
}

/// Robots allowed to receive the next action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pending {
    pub uavs: Vec<bool>,
    pub ugvs: Vec<bool>,
}

impl Pending {
    pub fn all(scenario: &Scenario) -> Self {
        Self { uavs: vec![true; scenario.fleet.n_uav], ugvs: vec![true; scenario.fleet.n_ugv] }
    }
}

/// Scenario constants resolved once: speeds, powers and per-task reserves.
#[derive(Debug, Clone)]
pub struct Dynamics<'a> {
    pub scenario: &'a Scenario,
    pub uav_speed: f64,
    pub ugv_speed: f64,
    /// UAV power at cruise speed, W.
    pub fly_power: f64,
    /// UAV power while hovering, W.
    pub hover_power: f64,
    pub drive_power: f64,
    pub idle_power: f64,
    pub uav_capacity: f64,
    pub ugv_capacity: f64,
    pub recharge_seconds: f64,
    /// Energy to fly from each task to its nearest road node.
    pub task_reserve_j: Vec<f64>,
}

impl<'a> Dynamics<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self> {
        let f = &scenario.fleet;
        let fly_power = scenario.energy.uav_power(f.uav_speed_mps)?;
        let hover_power = scenario.energy.uav_power(0.0)?;
        let drive_power = scenario.energy.ugv_power(f.ugv_speed_mps)?;
        let idle_power = scenario.energy.ugv_power(0.0)?;
        if !(f.uav_speed_mps > 0.0 && f.ugv_speed_mps > 0.0) {
            return Err(Error::Config("fleet speeds must be positive".into()));
        }
        let task_reserve_j = scenario
            .tasks
            .iter()
            .map(|t| {
                let d = scenario.road.nodes().iter().map(|n| n.dist(&t.position)).fold(f64::INFINITY, f64::min);
                d / f.uav_speed_mps * fly_power
            })
            .collect();
        Ok(Self {
            scenario,
            uav_speed: f.uav_speed_mps,
            ugv_speed: f.ugv_speed_mps,
            fly_power,
            hover_power,
            drive_power,
            idle_power,
            uav_capacity: f.uav_capacity_j,
            ugv_capacity: f.ugv_capacity_j,
            recharge_seconds: scenario.recharge_seconds,
            task_reserve_j,
        })
    }

    /// Everyone at the depot at time zero with full batteries.
    pub fn initial_state(&self) -> WorldState {
        let sc = self.scenario;
        let depot_node = sc.depot_node();
        let depot = sc.road.nodes()[depot_node];
        WorldState {
            clock: 0.0,
            uavs: (0..sc.fleet.n_uav)
                .map(|_| UavState { pos: sc.depot, energy: self.uav_capacity, status: UavStatus::Idle, free_at: 0.0, spent_j: 0.0 })
                .collect(),
            ugvs: (0..sc.fleet.n_ugv)
                .map(|_| UgvState { node: depot_node, pos: depot, energy: self.ugv_capacity, free_at: 0.0, spent_j: 0.0 })
                .collect(),
            visited: vec![false; sc.n_tasks()],
            n_unvisited: sc.n_tasks(),
        }
    }

    pub fn flight_time(&self, a: &Point, b: &Point) -> f64 {
        a.dist(b) / self.uav_speed
    }

    pub fn flight_energy(&self, a: &Point, b: &Point) -> f64 {
        self.flight_time(a, b) * self.fly_power
    }

    pub fn check(&self, state: &WorldState, action: Action) -> std::result::Result<(), InfeasibleReason> {
        self.resolve(state, action).map(|_| ())
    }

    /// Applies `action`, appending its events to `log` when given. On error `state` is untouched.
    pub fn apply(&self, state: &mut WorldState, action: Action, log: Option<&mut TraceLog>) -> std::result::Result<(), InfeasibleReason> {
        let step = self.resolve(state, action)?;
        self.commit(state, action, step, log);
        Ok(())
    }

    /// Every action that can be applied now, in lexicographic action order.
    pub fn valid_actions(&self, state: &WorldState, pending: &Pending) -> Vec<Action> {
        if state.all_visited() {
            return Vec::new();
        }
        let sc = self.scenario;
        let mut out = Vec::new();
        for uav in 0..sc.fleet.n_uav {
            if !pending.uavs[uav] {
                continue;
            }
            for task in state.unvisited() {
                let a = Action::UavVisit { uav, task };
                if self.check(state, a).is_ok() {
                    out.push(a);
                }
            }
        }
        for ugv in 0..sc.fleet.n_ugv {
            if !pending.ugvs[ugv] {
                continue;
            }
            for &(node, _) in sc.road.neighbors(state.ugvs[ugv].node) {
                let a = Action::UgvMove { ugv, node };
                if self.check(state, a).is_ok() {
                    out.push(a);
                }
            }
        }
        for uav in 0..sc.fleet.n_uav {
            for ugv in 0..sc.fleet.n_ugv {
                if !(pending.uavs[uav] && pending.ugvs[ugv]) {
                    continue;
                }
                let a = Action::Recharge { uav, ugv };
                if self.check(state, a).is_ok() {
                    out.push(a);
                }
            }
        }
        out
    }

    fn resolve(&self, state: &WorldState, action: Action) -> std::result::Result<Step, InfeasibleReason> {
        use InfeasibleReason::*;
        let sc = self.scenario;
        match action {
            Action::UavVisit { uav, task } => {
                let u = state.uavs.get(uav).ok_or(UnknownUav(uav))?;
                let target = sc.tasks.get(task).ok_or(UnknownTask(task))?.position;
                if state.all_visited() {
                    return Err(MissionComplete);
                }
                if state.visited[task] {
                    return Err(TaskAlreadyVisited(task));
                }
                let dt = self.flight_time(&u.pos, &target);
                let e = dt * self.fly_power;
                if e > u.energy {
                    return Err(UavEnergy { uav, needed_j: e, available_j: u.energy });
                }
                let remaining = u.energy - e;
                if remaining < self.task_reserve_j[task] {
                    return Err(Reserve { uav, task, remaining_j: remaining, reserve_j: self.task_reserve_j[task] });
                }
                Ok(Step::Visit { dt, energy: e, target })
            }
            Action::UgvMove { ugv, node } => {
                let g = state.ugvs.get(ugv).ok_or(UnknownUgv(ugv))?;
                if node >= sc.n_nodes() {
                    return Err(UnknownNode(node));
                }
                if state.all_visited() {
                    return Err(MissionComplete);
                }
                let len = sc.road.edge_length(g.node, node).ok_or(NotAdjacent { ugv, from: g.node, to: node })?;
                let dt = len / self.ugv_speed;
                let e = dt * self.drive_power;
                if e > g.energy {
                    return Err(UgvEnergy { ugv, needed_j: e, available_j: g.energy });
                }
                Ok(Step::Move { dt, energy: e, target: sc.road.nodes()[node] })
            }
            Action::Recharge { uav, ugv } => {
                let u = state.uavs.get(uav).ok_or(UnknownUav(uav))?;
                let g = state.ugvs.get(ugv).ok_or(UnknownUgv(ugv))?;
                if state.all_visited() {
                    return Err(MissionComplete);
                }
                if u.status == UavStatus::Docked(ugv) {
                    return Err(AlreadyDocked { uav, ugv });
                }
                let fly_dt = self.flight_time(&u.pos, &g.pos);
                // A UAV on the ground can hold its takeoff so it arrives just as the UGV does.
                let landed = u.status != UavStatus::Airborne;
                let depart = if landed { u.free_at.max(g.free_at - fly_dt) } else { u.free_at };
                let arrival = depart + fly_dt;
                let start = arrival.max(g.free_at);
                let hover_dt = start - arrival;
                let idle_dt = start - g.free_at;
                let fly_e = fly_dt * self.fly_power;
                let hover_e = if landed { 0.0 } else { hover_dt * self.hover_power };
                let needed = fly_e + hover_e;
                if needed > u.energy {
                    return Err(UavEnergy { uav, needed_j: needed, available_j: u.energy });
                }
                let idle_e = idle_dt * self.idle_power;
                if idle_e > g.energy {
                    return Err(UgvEnergy { ugv, needed_j: idle_e, available_j: g.energy });
                }
                Ok(Step::Recharge { depart, fly_dt, fly_e, arrival, start, hover_e, idle_e, needed })
            }
        }
    }

    fn commit(&self, state: &mut WorldState, action: Action, step: Step, mut log: Option<&mut TraceLog>) {
        let mut push = |e: Event| {
            if let Some(log) = log.as_deref_mut() {
                log.events.push(e);
            }
        };
        match (action, step) {
            (Action::UavVisit { uav, task }, Step::Visit { dt, energy, target }) => {
                let u = &mut state.uavs[uav];
                push(Event {
                    t_start: u.free_at,
                    t_end: u.free_at + dt,
                    robot: RobotId::Uav(uav),
                    kind: EventKind::Visit,
                    from: u.pos,
                    to: target,
                    energy_j: energy,
                });
                u.free_at += dt;
                u.pos = target;
                u.energy -= energy;
                u.spent_j += energy;
                u.status = UavStatus::Airborne;
                state.visited[task] = true;
                state.n_unvisited -= 1;
                state.clock = state.clock.max(u.free_at);
            }
            (Action::UgvMove { ugv, node }, Step::Move { dt, energy, target }) => {
                let (t0, from) = (state.ugvs[ugv].free_at, state.ugvs[ugv].pos);
                let t1 = t0 + dt;
                for r in 0..state.uavs.len() {
                    if state.uavs[r].status != UavStatus::Docked(ugv) {
                        continue;
                    }
                    let rider = &mut state.uavs[r];
                    if rider.free_at < t0 {
                        push(Event {
                            t_start: rider.free_at,
                            t_end: t0,
                            robot: RobotId::Uav(r),
                            kind: EventKind::Wait,
                            from,
                            to: from,
                            energy_j: 0.0,
                        });
                    }
                    push(Event { t_start: t0, t_end: t1, robot: RobotId::Uav(r), kind: EventKind::Drive, from, to: target, energy_j: 0.0 });
                    rider.free_at = t1;
                    rider.pos = target;
                }
                push(Event { t_start: t0, t_end: t1, robot: RobotId::Ugv(ugv), kind: EventKind::Drive, from, to: target, energy_j: energy });
                let g = &mut state.ugvs[ugv];
                g.free_at = t1;
                g.node = node;
                g.pos = target;
                g.energy -= energy;
                g.spent_j += energy;
                state.clock = state.clock.max(t1);
            }
            (Action::Recharge { uav, ugv }, Step::Recharge { depart, fly_dt, fly_e, arrival, start, hover_e, idle_e, needed }) => {
                let end = start + self.recharge_seconds;
                let (g_node, g_pos, g_free) = (state.ugvs[ugv].node, state.ugvs[ugv].pos, state.ugvs[ugv].free_at);
                let u = &mut state.uavs[uav];
                let (u_pos, u_free) = (u.pos, u.free_at);
                if depart > u_free {
                    push(Event { t_start: u_free, t_end: depart, robot: RobotId::Uav(uav), kind: EventKind::Wait, from: u_pos, to: u_pos, energy_j: 0.0 });
                }
                if fly_dt > 0.0 {
                    push(Event { t_start: depart, t_end: arrival, robot: RobotId::Uav(uav), kind: EventKind::Fly, from: u_pos, to: g_pos, energy_j: fly_e });
                }
                if start > arrival {
                    push(Event { t_start: arrival, t_end: start, robot: RobotId::Uav(uav), kind: EventKind::Wait, from: g_pos, to: g_pos, energy_j: hover_e });
                }
                if start > g_free {
                    push(Event { t_start: g_free, t_end: start, robot: RobotId::Ugv(ugv), kind: EventKind::Wait, from: g_pos, to: g_pos, energy_j: idle_e });
                }
                let remaining = u.energy - needed;
                let gained = self.uav_capacity - remaining;
                push(Event { t_start: start, t_end: end, robot: RobotId::Uav(uav), kind: EventKind::Recharge, from: g_pos, to: g_pos, energy_j: -gained });
                push(Event { t_start: start, t_end: end, robot: RobotId::Ugv(ugv), kind: EventKind::Recharge, from: g_pos, to: g_pos, energy_j: 0.0 });
                if let Some(log) = log.as_deref_mut() {
                    log.rendezvous.push(Rendezvous {
                        uav,
                        ugv,
                        node: g_node,
                        uav_position: g_pos,
                        ugv_position: g_pos,
                        uav_arrival: arrival,
                        ugv_arrival: g_free,
                        start,
                        end,
                    });
                }
                u.pos = g_pos;
                u.energy = self.uav_capacity;
                u.spent_j += fly_e + hover_e;
                u.status = UavStatus::Docked(ugv);
                u.free_at = end;
                let g = &mut state.ugvs[ugv];
                g.energy -= idle_e;
                g.spent_j += idle_e;
                g.free_at = end;
                state.clock = state.clock.max(end);
            }
            _ => unreachable!("step does not match action"),
        }
    }

    /// Closes every robot's timeline at the makespan. UGVs idle at standby power; UAVs that are
    /// done stay down and draw nothing.
    pub fn finish(&self, state: WorldState, mut log: TraceLog) -> std::result::Result<ExecutionTrace, InfeasibleReason> {
        let mut state = state;
        let makespan = state.clock;
        for (i, u) in state.uavs.iter_mut().enumerate() {
            if u.free_at < makespan {
                log.events.push(Event {
                    t_start: u.free_at,
                    t_end: makespan,
                    robot: RobotId::Uav(i),
                    kind: EventKind::Wait,
                    from: u.pos,
                    to: u.pos,
                    energy_j: 0.0,
                });
                u.free_at = makespan;
            }
        }
        for (j, g) in state.ugvs.iter_mut().enumerate() {
            if g.free_at < makespan {
                let e = (makespan - g.free_at) * self.idle_power;
                if e > g.energy {
                    return Err(InfeasibleReason::UgvEnergy { ugv: j, needed_j: e, available_j: g.energy });
                }
                log.events.push(Event {
                    t_start: g.free_at,
                    t_end: makespan,
                    robot: RobotId::Ugv(j),
                    kind: EventKind::Wait,
                    from: g.pos,
                    to: g.pos,
                    energy_j: e,
                });
                g.energy -= e;
                g.spent_j += e;
                g.free_at = makespan;
            }
        }
        Ok(ExecutionTrace { events: log.events, rendezvous: log.rendezvous, final_state: state })
    }
}

#[derive(Debug, Clone, Copy)]
enum Step {
    Visit { dt: f64, energy: f64, target: Point },
    Move { dt: f64, energy: f64, target: Point },
    Recharge { depart: f64, fly_dt: f64, fly_e: f64, arrival: f64, start: f64, hover_e: f64, idle_e: f64, needed: f64 },
}

/// Actions applicable in `state` for the robots marked in `pending`.
pub fn valid_actions(scenario: &Scenario, state: &WorldState, pending: &Pending) -> Result<Vec<Action>> {
    Ok(Dynamics::new(scenario)?.valid_actions(state, pending))
}

/// Runs a complete plan. Every task must be visited exactly once and every action must be
/// applicable at its position in the sequence.
pub fn execute_plan(scenario: &Scenario, plan: &JointPlan) -> Result<ExecutionTrace> {
    let dynamics = Dynamics::new(scenario)?;
    if plan.is_empty() {
        return Err(Error::InfeasiblePlan { step: 0, reason: InfeasibleReason::EmptyPlan });
    }
    let mut state = dynamics.initial_state();
    let mut log = TraceLog::default();
    for (step, &action) in plan.actions.iter().enumerate() {
        dynamics.apply(&mut state, action, Some(&mut log)).map_err(|reason| Error::InfeasiblePlan { step, reason })?;
    }
    if !state.all_visited() {
        let unvisited = state.unvisited().collect();
        return Err(Error::InfeasiblePlan { step: plan.len(), reason: InfeasibleReason::Incomplete { unvisited } });
    }
    dynamics.finish(state, log).map_err(|reason| Error::InfeasiblePlan { step: plan.len(), reason })
}
