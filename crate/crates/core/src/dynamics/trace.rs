use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::state::{RobotId, WorldState};
use crate::geometry::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Fly,
    Drive,
    Wait,
    Recharge,
    Visit,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Fly => "fly",
            EventKind::Drive => "drive",
            EventKind::Wait => "wait",
            EventKind::Recharge => "recharge",
            EventKind::Visit => "visit",
        })
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "fly" => EventKind::Fly,
            "drive" => EventKind::Drive,
            "wait" => EventKind::Wait,
            "recharge" => EventKind::Recharge,
            "visit" => EventKind::Visit,
            _ => return Err(format!("unknown event kind {s:?}")),
        })
    }
}

/// One interval of one robot's timeline. `energy_j` is consumption; recharges carry the energy
/// restored as a negative value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t_start: f64,
    pub t_end: f64,
    pub robot: RobotId,
    pub kind: EventKind,
    pub from: Point,
    pub to: Point,
    pub energy_j: f64,
}

impl Event {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// `start end robot kind x0 y0 x1 y1 joules`
    pub fn to_line(&self) -> String {
        format!(
            "{} {} {} {} {} {} {} {} {}",
            self.t_start, self.t_end, self.robot, self.kind, self.from.x, self.from.y, self.to.x, self.to.y, self.energy_j
        )
    }

    pub fn from_line(line: &str) -> Result<Self, String> {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 9 {
            return Err(format!("expected 9 fields, got {} in {line:?}", f.len()));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| format!("bad number {s:?} in {line:?}"));
        Ok(Event {
            t_start: num(f[0])?,
            t_end: num(f[1])?,
            robot: f[2].parse()?,
            kind: f[3].parse()?,
            from: Point::new(num(f[4])?, num(f[5])?),
            to: Point::new(num(f[6])?, num(f[7])?),
            energy_j: num(f[8])?,
        })
    }
}

/// A synchronized meeting of one UAV and one UGV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rendezvous {
    pub uav: usize,
    pub ugv: usize,
    pub node: usize,
    pub uav_position: Point,
    pub ugv_position: Point,
    pub uav_arrival: f64,
    pub ugv_arrival: f64,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceLog {
    pub events: Vec<Event>,
    pub rendezvous: Vec<Rendezvous>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionTrace {
    pub events: Vec<Event>,
    pub rendezvous: Vec<Rendezvous>,
    pub final_state: WorldState,
}

impl ExecutionTrace {
    pub fn metrics(&self) -> Metrics {
        metrics(&self.events)
    }

    pub fn robot_events(&self, robot: RobotId) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.robot == robot)
    }

    pub fn to_event_log(&self) -> String {
        let mut out = String::from("# start end robot kind x0 y0 x1 y1 joules\n");
        for e in &self.events {
            out.push_str(&e.to_line());
            out.push('\n');
        }
        out
    }
}

/// Parses the line-oriented event log back into events; comment lines are skipped.
pub fn parse_event_log(text: &str) -> Result<Vec<Event>, String> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(Event::from_line).collect()
}

/// The three mission metrics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub makespan_s: f64,
    pub uav_energy_kj: f64,
    pub ugv_energy_kj: f64,
}

/// Makespan is the latest event end; energies sum consumption (recharges excluded) per platform.
pub fn metrics(events: &[Event]) -> Metrics {
    let mut m = Metrics::default();
    for e in events {
        m.makespan_s = m.makespan_s.max(e.t_end);
        if e.energy_j > 0.0 {
            match e.robot {
                RobotId::Uav(_) => m.uav_energy_kj += e.energy_j,
                RobotId::Ugv(_) => m.ugv_energy_kj += e.energy_j,
            }
        }
    }
    m.uav_energy_kj /= 1000.0;
    m.ugv_energy_kj /= 1000.0;
    m
}
