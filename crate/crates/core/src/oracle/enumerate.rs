use crate::dynamics::policy::GreedyPolicy;
use crate::dynamics::{Action, Dynamics, JointPlan, Pending, WorldState};

/// Outcome of brute-force enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct Enumeration {
    /// Best completed makespan, absolute time.
    pub makespan_s: Option<f64>,
    pub plan: Option<JointPlan>,
    /// Action sequences visited, partial ones included.
    pub sequences: usize,
    /// False when the sequence cap cut the enumeration short.
    pub complete: bool,
}

/// Enumerates every action sequence from `state` in depth-first order, without any reordering
/// reduction or heuristic. A branch is only cut once its clock exceeds the best makespan found,
/// which is sound because the clock never decreases. The greedy completion seeds that cut.
pub fn enumerate_from(dynamics: &Dynamics<'_>, state: &WorldState, max_sequences: usize) -> Enumeration {
    let seed = GreedyPolicy::new(dynamics).complete(state).map(|(_, end)| end.clock);
    let mut e = Enumerator {
        dynamics,
        pending: Pending::all(dynamics.scenario),
        cutoff: seed.unwrap_or(f64::INFINITY),
        best: None,
        path: Vec::new(),
        sequences: 0,
        max_sequences,
        complete: true,
    };
    e.visit(state);
    Enumeration { makespan_s: e.best.as_ref().map(|b| b.0), plan: e.best.map(|b| b.1), sequences: e.sequences, complete: e.complete }
}

/// Brute-force optimum of a whole scenario, capped at `max_sequences` explored sequences.
pub fn enumerate(scenario: &crate::Scenario, max_sequences: usize) -> crate::Result<Enumeration> {
    let dynamics = Dynamics::new(scenario)?;
    let root = dynamics.initial_state();
    Ok(enumerate_from(&dynamics, &root, max_sequences))
}

struct Enumerator<'d, 'a> {
    dynamics: &'d Dynamics<'a>,
    pending: Pending,
    cutoff: f64,
    best: Option<(f64, JointPlan)>,
    path: Vec<Action>,
    sequences: usize,
    max_sequences: usize,
    complete: bool,
}

impl Enumerator<'_, '_> {
    fn visit(&mut self, state: &WorldState) {
        if self.sequences >= self.max_sequences {
            self.complete = false;
            return;
        }
        self.sequences += 1;
        if state.all_visited() {
            let ok = self.dynamics.finish(state.clone(), Default::default()).is_ok();
            if ok && self.best.as_ref().is_none_or(|b| state.clock < b.0) {
                self.best = Some((state.clock, JointPlan::new(self.path.clone())));
                self.cutoff = self.cutoff.min(state.clock);
            }
            return;
        }
        for action in self.dynamics.valid_actions(state, &self.pending) {
            let mut next = state.clone();
            self.dynamics.apply(&mut next, action, None).expect("valid action applies");
            if next.clock > self.cutoff {
                continue;
            }
            self.path.push(action);
            self.visit(&next);
            self.path.pop();
        }
    }
}
