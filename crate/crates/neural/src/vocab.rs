use copcs_core::{Action, Scenario};

/// Flat action ids for one mission size: the visit block `(uav, task)`, then the move block
/// `(ugv, node)`, then the recharge block `(uav, ugv)`, then the start token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vocab {
    pub n_uav: usize,
    pub n_tasks: usize,
    pub n_ugv: usize,
    pub n_paths: usize,
}

impl Vocab {
    pub fn for_scenario(s: &Scenario) -> Self {
        Self { n_uav: s.fleet.n_uav, n_tasks: s.n_tasks(), n_ugv: s.fleet.n_ugv, n_paths: s.n_nodes() }
    }

    fn n_visit(&self) -> usize {
        self.n_uav * self.n_tasks
    }

    fn n_move(&self) -> usize {
        self.n_ugv * self.n_paths
    }

    fn n_recharge(&self) -> usize {
        self.n_uav * self.n_ugv
    }

    pub fn size(&self) -> usize {
        self.n_visit() + self.n_move() + self.n_recharge() + 1
    }

    pub fn start(&self) -> usize {
        self.size() - 1
    }

    /// `None` when an index is out of range for this mission.
    pub fn encode(&self, a: Action) -> Option<usize> {
        match a {
            Action::UavVisit { uav, task } if uav < self.n_uav && task < self.n_tasks => Some(uav * self.n_tasks + task),
            Action::UgvMove { ugv, node } if ugv < self.n_ugv && node < self.n_paths => Some(self.n_visit() + ugv * self.n_paths + node),
            Action::Recharge { uav, ugv } if uav < self.n_uav && ugv < self.n_ugv => {
                Some(self.n_visit() + self.n_move() + uav * self.n_ugv + ugv)
            }
            _ => None,
        }
    }

    /// `None` for the start token and anything past it.
    pub fn decode(&self, id: usize) -> Option<Action> {
        let mut k = id;
        if k < self.n_visit() {
            return Some(Action::UavVisit { uav: k / self.n_tasks, task: k % self.n_tasks });
        }
        k -= self.n_visit();
        if k < self.n_move() {
            return Some(Action::UgvMove { ugv: k / self.n_paths, node: k % self.n_paths });
        }
        k -= self.n_move();
        if k < self.n_recharge() {
            return Some(Action::Recharge { uav: k / self.n_ugv, ugv: k % self.n_ugv });
        }
        None
    }
}
