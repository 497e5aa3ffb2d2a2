use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::hash::{Hash, Hasher};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::bound::makespan_lower_bound;
use crate::dynamics::policy::GreedyPolicy;
use crate::dynamics::{Action, Dynamics, JointPlan, Pending, UavStatus, WorldState};
use crate::error::{Error, Result};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budget {
    /// Maximum number of expanded search nodes.
    pub max_nodes: usize,
    /// Optional wall-clock limit. Results are only reproducible when this is `None`.
    pub max_seconds: Option<f64>,
}

impl Default for Budget {
    fn default() -> Self {
        Self { max_nodes: 2_000_000, max_seconds: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    BudgetExhausted,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::BudgetExhausted => "budget_exhausted",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    pub plan: JointPlan,
    pub makespan_s: f64,
    /// Total UAV energy consumed by the plan, the secondary objective.
    pub uav_energy_j: f64,
    pub status: SolveStatus,
    pub expanded: usize,
}

/// Ordering context carried along a partial plan.
///
/// Actions on disjoint robots commute, so the search only generates one interleaving of them:
/// actions are emitted in non-decreasing order of their start key, and among actions with equal
/// keys that share no robot, in increasing action order.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Context {
    key: f64,
    robots: u64,
    action: Option<Action>,
}

impl Context {
    const ROOT: Context = Context { key: f64::NEG_INFINITY, robots: 0, action: None };

    fn admits(&self, key: f64, robots: u64, action: Action) -> bool {
        match key.total_cmp(&self.key) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => robots & self.robots != 0 || self.action.is_none_or(|last| action > last),
        }
    }
}

/// Start key and robot footprint of `action` in `state`. The footprint over-approximates the
/// robots whose state the action reads or writes.
fn footprint(state: &WorldState, action: Action) -> (f64, u64) {
    let n_uav = state.uavs.len();
    let uav_bit = |i: usize| 1u64 << i;
    let ugv_bit = |j: usize| 1u64 << (n_uav + j);
    let riders = |j: usize| state.riders(j).fold(0u64, |m, i| m | uav_bit(i));
    match action {
        Action::UavVisit { uav, .. } => (state.uavs[uav].free_at, uav_bit(uav)),
        Action::UgvMove { ugv, .. } => (state.ugvs[ugv].free_at, ugv_bit(ugv) | riders(ugv)),
        Action::Recharge { uav, ugv } => {
            let u = &state.uavs[uav];
            let mut mask = uav_bit(uav) | ugv_bit(ugv) | riders(ugv);
            if let UavStatus::Docked(j) = u.status {
                mask |= ugv_bit(j) | riders(j);
            }
            (u.free_at.max(state.ugvs[ugv].free_at), mask)
        }
    }
}

fn state_hash(state: &WorldState, ctx: &Context, buf: &mut Vec<u64>) -> u128 {
    buf.clear();
    state.fingerprint(buf);
    buf.push(ctx.key.to_bits());
    buf.push(ctx.robots);
    let mut words = [0u64; 2];
    for (salt, w) in words.iter_mut().enumerate() {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        salt.hash(&mut h);
        buf.hash(&mut h);
        ctx.action.hash(&mut h);
        *w = h.finish();
    }
    (words[0] as u128) << 64 | words[1] as u128
}

struct Node {
    state: Option<WorldState>,
    parent: usize,
    action: Option<Action>,
    depth: usize,
    ctx: Context,
}

#[derive(PartialEq)]
struct Open {
    lb: f64,
    depth: usize,
    seq: usize,
    node: usize,
}

impl Eq for Open {}

impl Ord for Open {
    // BinaryHeap is a max-heap: smallest bound first, then deeper nodes, then insertion order.
    fn cmp(&self, other: &Self) -> Ordering {
        other.lb.total_cmp(&self.lb).then(self.depth.cmp(&other.depth)).then(other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn plan_of(nodes: &[Node], mut id: usize) -> JointPlan {
    let mut actions = Vec::with_capacity(nodes[id].depth);
    while let Some(a) = nodes[id].action {
        actions.push(a);
        id = nodes[id].parent;
    }
    actions.reverse();
    JointPlan::new(actions)
}

/// Tasks that no UAV can serve even with a recharge at the best road node.
fn unreachable_tasks(dynamics: &Dynamics<'_>) -> Vec<usize> {
    dynamics.task_reserve_j.iter().enumerate().filter(|(_, &r)| 2.0 * r > dynamics.uav_capacity).map(|(m, _)| m).collect()
}

/// Minimum-makespan joint plan by best-first branch and bound over the executor's actions.
///
/// Ties on makespan go to the lower total UAV energy; remaining ties go to the plan found first,
/// which is deterministic for a given scenario and node budget.
pub fn solve_exact(scenario: &Scenario, budget: Budget) -> Result<ExactSolution> {
    let dynamics = Dynamics::new(scenario)?;
    let unreachable = unreachable_tasks(&dynamics);
    if !unreachable.is_empty() {
        return Err(Error::NoFeasiblePlan(format!("{}: tasks {unreachable:?} are out of UAV range from every road node", scenario.id)));
    }
    let started = Instant::now();
    let root = dynamics.initial_state();
    let pending = Pending::all(scenario);

    let mut best: Option<(f64, f64, JointPlan)> = GreedyPolicy::new(&dynamics)
        .complete(&root)
        .filter(|(actions, _)| dynamics_accepts(&dynamics, actions))
        .map(|(actions, end)| (end.clock, end.uav_spent(), JointPlan::new(actions)));

    let mut nodes = vec![Node { state: Some(root.clone()), parent: 0, action: None, depth: 0, ctx: Context::ROOT }];
    let mut open = BinaryHeap::new();
    open.push(Open { lb: makespan_lower_bound(&dynamics, &root), depth: 0, seq: 0, node: 0 });
    let mut seen = HashSet::new();
    let mut buf = Vec::new();
    let mut expanded = 0usize;
    let mut exhausted = false;

    while let Some(top) = open.pop() {
        let state = nodes[top.node].state.take().expect("open node keeps its state");
        if let Some((best_ms, best_e, _)) = &best {
            if top.lb > *best_ms {
                break;
            }
            if top.lb == *best_ms && state.uav_spent() >= *best_e {
                continue;
            }
        }
        if expanded >= budget.max_nodes || budget.max_seconds.is_some_and(|s| started.elapsed().as_secs_f64() > s) {
            exhausted = true;
            break;
        }
        expanded += 1;
        let ctx = nodes[top.node].ctx;
        for action in dynamics.valid_actions(&state, &pending) {
            let (key, robots) = footprint(&state, action);
            if !ctx.admits(key, robots, action) {
                continue;
            }
            let mut child = state.clone();
            dynamics.apply(&mut child, action, None).expect("valid action applies");
            let child_ctx = Context { key, robots, action: Some(action) };
            if !seen.insert(state_hash(&child, &child_ctx, &mut buf)) {
                continue;
            }
            let spent = child.uav_spent();
            let id = nodes.len();
            let depth = top.depth + 1;
            if child.all_visited() {
                let ms = child.clock;
                let better = best.as_ref().is_none_or(|(b_ms, b_e, _)| ms < *b_ms || (ms == *b_ms && spent < *b_e));
                if better && dynamics.finish(child, Default::default()).is_ok() {
                    nodes.push(Node { state: None, parent: top.node, action: Some(action), depth, ctx: child_ctx });
                    best = Some((ms, spent, plan_of(&nodes, id)));
                }
                continue;
            }
            let lb = makespan_lower_bound(&dynamics, &child);
            if let Some((best_ms, best_e, _)) = &best {
                if lb > *best_ms || (lb == *best_ms && spent >= *best_e) {
                    continue;
                }
            }
            nodes.push(Node { state: Some(child), parent: top.node, action: Some(action), depth, ctx: child_ctx });
            open.push(Open { lb, depth, seq: id, node: id });
        }
    }

    match best {
        Some((makespan_s, uav_energy_j, plan)) => Ok(ExactSolution {
            plan,
            makespan_s,
            uav_energy_j,
            status: if exhausted { SolveStatus::BudgetExhausted } else { SolveStatus::Optimal },
            expanded,
        }),
        None if exhausted => Err(Error::BudgetExhausted),
        None => Err(Error::NoFeasiblePlan(scenario.id.clone())),
    }
}

fn dynamics_accepts(dynamics: &Dynamics<'_>, actions: &[Action]) -> bool {
    let mut s = dynamics.initial_state();
    actions.iter().all(|&a| dynamics.apply(&mut s, a, None).is_ok()) && dynamics.finish(s, Default::default()).is_ok()
}
