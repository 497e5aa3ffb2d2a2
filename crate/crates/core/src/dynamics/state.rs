use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UavStatus {
    /// On the ground and unpowered; every UAV starts this way at the depot.
    Idle,
    Airborne,
    /// Sitting on a UGV; it rides along when that UGV moves.
    Docked(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavState {
    pub pos: Point,
    pub energy: f64,
    pub status: UavStatus,
    /// Time at which the UAV finishes its last committed action.
    pub free_at: f64,
    /// Energy consumed so far, recharges excluded.
    pub spent_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UgvState {
    pub node: usize,
    pub pos: Point,
    pub energy: f64,
    pub free_at: f64,
    pub spent_j: f64,
}

/// Dynamic mission snapshot. Each robot carries its own timeline; `clock` is the latest time any
/// robot has committed to, which is also the makespan of the plan applied so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub clock: f64,
    pub uavs: Vec<UavState>,
    pub ugvs: Vec<UgvState>,
    pub visited: Vec<bool>,
    pub n_unvisited: usize,
}

impl WorldState {
    pub fn all_visited(&self) -> bool {
        self.n_unvisited == 0
    }

    pub fn unvisited(&self) -> impl Iterator<Item = usize> + '_ {
        self.visited.iter().enumerate().filter(|(_, &v)| !v).map(|(i, _)| i)
    }

    /// UAVs currently docked on `ugv`.
    pub fn riders(&self, ugv: usize) -> impl Iterator<Item = usize> + '_ {
        self.uavs.iter().enumerate().filter(move |(_, u)| u.status == UavStatus::Docked(ugv)).map(|(i, _)| i)
    }

    pub fn uav_spent(&self) -> f64 {
        self.uavs.iter().map(|u| u.spent_j).sum()
    }

    /// Exact bit pattern of every field, for transposition tables.
    pub fn fingerprint(&self, out: &mut Vec<u64>) {
        out.push(self.clock.to_bits());
        for u in &self.uavs {
            out.extend([u.pos.x.to_bits(), u.pos.y.to_bits(), u.energy.to_bits(), u.free_at.to_bits(), u.spent_j.to_bits()]);
            out.push(match u.status {
                UavStatus::Idle => u64::MAX,
                UavStatus::Airborne => u64::MAX - 1,
                UavStatus::Docked(j) => j as u64,
            });
        }
        for g in &self.ugvs {
            out.extend([g.node as u64, g.energy.to_bits(), g.free_at.to_bits()]);
        }
        let mut word = 0u64;
        for (i, &v) in self.visited.iter().enumerate() {
            if v {
                word |= 1 << (i % 64);
            }
            if i % 64 == 63 {
                out.push(word);
                word = 0;
            }
        }
        out.push(word);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RobotId {
    Uav(usize),
    Ugv(usize),
}

impl fmt::Display for RobotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RobotId::Uav(i) => write!(f, "uav{i}"),
            RobotId::Ugv(i) => write!(f, "ugv{i}"),
        }
    }
}

impl std::str::FromStr for RobotId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |rest: &str| rest.parse::<usize>().map_err(|_| format!("bad robot id {s:?}"));
        if let Some(rest) = s.strip_prefix("uav") {
            Ok(RobotId::Uav(parse(rest)?))
        } else if let Some(rest) = s.strip_prefix("ugv") {
            Ok(RobotId::Ugv(parse(rest)?))
        } else {
            Err(format!("bad robot id {s:?}"))
        }
    }
}
