use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One decision of the joint plan. The derived ordering is the lexicographic action order used
/// for tie breaking: visits, then moves, then recharges, each by (robot, target).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    /// UAV `uav` flies to task `task` and services it.
    UavVisit { uav: usize, task: usize },
    /// UGV `ugv` drives along one road edge to node `node`.
    UgvMove { ugv: usize, node: usize },
    /// UAV `uav` meets UGV `ugv` at the UGV's current node and swaps to a full battery.
    Recharge { uav: usize, ugv: usize },
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Action::UavVisit { uav, task } => write!(f, "visit {uav} {task}"),
            Action::UgvMove { ugv, node } => write!(f, "move {ugv} {node}"),
            Action::Recharge { uav, ugv } => write!(f, "recharge {uav} {ugv}"),
        }
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        let [kind, a, b] = parts[..] else {
            return Err(format!("expected `<kind> <i> <j>`, got {s:?}"));
        };
        let a: usize = a.parse().map_err(|_| format!("bad index {a:?} in {s:?}"))?;
        let b: usize = b.parse().map_err(|_| format!("bad index {b:?} in {s:?}"))?;
        match kind {
            "visit" => Ok(Action::UavVisit { uav: a, task: b }),
            "move" => Ok(Action::UgvMove { ugv: a, node: b }),
            "recharge" => Ok(Action::Recharge { uav: a, ugv: b }),
            _ => Err(format!("unknown action kind {kind:?}")),
        }
    }
}

/// Ordered joint action sequence for the whole team.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointPlan {
    pub actions: Vec<Action>,
}

impl JointPlan {
    pub fn new(actions: Vec<Action>) -> Self {
        Self { actions }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// One action per line, in the token file format.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for a in &self.actions {
            out.push_str(&a.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_lines(text: &str) -> Result<Self, String> {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(Action::from_str)
            .collect::<Result<Vec<_>, _>>()
            .map(JointPlan::new)
    }

    /// Per-robot subsequences: UAV `i` gets its visits and recharges, UGV `j` its moves and the
    /// recharges it serves.
    pub fn partition(&self, n_uav: usize, n_ugv: usize) -> (Vec<Vec<Action>>, Vec<Vec<Action>>) {
        let mut uavs = vec![Vec::new(); n_uav];
        let mut ugvs = vec![Vec::new(); n_ugv];
        for &a in &self.actions {
            match a {
                Action::UavVisit { uav, .. } => uavs[uav].push(a),
                Action::UgvMove { ugv, .. } => ugvs[ugv].push(a),
                Action::Recharge { uav, ugv } => {
                    uavs[uav].push(a);
                    ugvs[ugv].push(a);
                }
            }
        }
        (uavs, ugvs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let plan = JointPlan::new(vec![
            Action::UavVisit { uav: 0, task: 3 },
            Action::UgvMove { ugv: 1, node: 2 },
            Action::Recharge { uav: 0, ugv: 1 },
        ]);
        assert_eq!(JointPlan::from_lines(&plan.to_lines()).unwrap(), plan);
        assert!("fly 0 1".parse::<Action>().is_err());
        assert!("visit 0".parse::<Action>().is_err());
    }

    #[test]
    fn ordering_is_kind_then_indices() {
        let mut v = vec![
            Action::Recharge { uav: 0, ugv: 0 },
            Action::UgvMove { ugv: 0, node: 1 },
            Action::UavVisit { uav: 1, task: 0 },
            Action::UavVisit { uav: 0, task: 2 },
        ];
        v.sort();
        assert_eq!(v[0], Action::UavVisit { uav: 0, task: 2 });
        assert_eq!(v[3], Action::Recharge { uav: 0, ugv: 0 });
    }
}
