use serde::{Deserialize, Serialize};

use copcs_core::dynamics::{policy::GreedyPolicy, Dynamics, Pending, TraceLog};
use copcs_core::scenario::{build_context_graph, RadiusConfig};
use copcs_core::{Action, JointPlan, Scenario, WorldState};

use crate::error::{NeuralError, Result};
use crate::model::Model;
use crate::vocab::Vocab;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecodeMode {
    /// Embed the initial state once and condition every step on it.
    #[default]
    EncodeOnce,
    /// Rebuild the context graph from the current state before every step.
    ReencodeEachStep,
}

impl std::str::FromStr for DecodeMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "encode-once" => Ok(Self::EncodeOnce),
            "reencode-each-step" | "reencode" => Ok(Self::ReencodeEachStep),
            _ => Err(format!("unknown decode mode {s:?}")),
        }
    }
}

/// Actions that are valid now and after which the greedy policy still completes the mission
/// within the positional table, closing timelines included. `steps` is the number of actions already decoded.
pub fn safe_actions(dynamics: &Dynamics<'_>, policy: &GreedyPolicy<'_, '_>, state: &WorldState, steps: usize, max_len: usize) -> Vec<Action> {
    let pending = Pending::all(dynamics.scenario);
    dynamics
        .valid_actions(state, &pending)
        .into_iter()
        .filter(|&a| {
            let mut next = state.clone();
            if dynamics.apply(&mut next, a, None).is_err() {
                return false;
            }
            let (rest, end) = if next.all_visited() {
                (0, next)
            } else {
                match policy.complete(&next) {
                    Some((tail, end)) => (tail.len(), end),
                    None => return false,
                }
            };
            // UGVs idle until the makespan, which can still run a drained battery dry.
            steps + 1 + rest <= max_len && dynamics.finish(end, TraceLog::default()).is_ok()
        })
        .collect()
}

/// Greedy argmax decoding with every action outside [`safe_actions`] masked out. Ties go to the
/// lowest token id. In [`DecodeMode::ReencodeEachStep`] position `t` sees the context graph of
/// the state before its token, as in [`Model::loss_stepwise`](crate::Model::loss_stepwise).
pub fn masked_greedy_decode(scenario: &Scenario, model: &Model, mode: DecodeMode) -> Result<JointPlan> {
    let dynamics = Dynamics::new(scenario)?;
    let policy = GreedyPolicy::new(&dynamics);
    let vocab = Vocab::for_scenario(scenario);
    let radii = RadiusConfig::for_scenario(scenario);
    let mut state = dynamics.initial_state();
    let mut graphs = vec![build_context_graph(scenario, &state, &radii)];
    let mut tokens: Vec<usize> = Vec::new();
    let mut actions = Vec::new();

    while !state.all_visited() {
        let safe = safe_actions(&dynamics, &policy, &state, actions.len(), model.config.max_len);
        if safe.is_empty() {
            return Err(NeuralError::DeadEnd { step: actions.len() });
        }
        let mut f = model.forward();
        let logits = match mode {
            DecodeMode::EncodeOnce => {
                let h = f.encode(&graphs[0])?;
                let table = f.action_table(h, &graphs[0], &vocab);
                f.decoder(h, table, &vocab, &tokens)?
            }
            DecodeMode::ReencodeEachStep => {
                let mut hs = Vec::with_capacity(graphs.len());
                let mut tables = Vec::with_capacity(graphs.len());
                for g in &graphs {
                    let h = f.encode(g)?;
                    tables.push(f.action_table(h, g, &vocab));
                    hs.push(h);
                }
                f.decoder_stepwise(&hs, &tables, &vocab, &tokens)?
            }
        };
        let row = f.tape.value(logits).row(tokens.len()).to_owned();

        let mut best: Option<(usize, f64)> = None;
        for &a in &safe {
            let id = vocab.encode(a).expect("valid actions are in the vocabulary");
            let v = row[id];
            if !v.is_finite() {
                return Err(NeuralError::NonFinite(format!("logit of {a}")));
            }
            if best.is_none_or(|(bid, bv)| v > bv || (v == bv && id < bid)) {
                best = Some((id, v));
            }
        }
        let (id, _) = best.expect("safe set is non-empty");
        let action = vocab.decode(id).expect("action id");
        dynamics.apply(&mut state, action, None).expect("safe actions apply");
        tokens.push(id);
        actions.push(action);
        if mode == DecodeMode::ReencodeEachStep {
            graphs.push(build_context_graph(scenario, &state, &radii));
        }
    }
    Ok(JointPlan::new(actions))
}
