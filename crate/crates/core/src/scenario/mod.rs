//! Mission descriptions: static scenario data, random instance generation, the typed context
//! graph consumed by the encoder, and the on-disk scenario format.

mod graph;
mod road;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::EnergyModelParams;
use crate::error::{Error, Result};
use crate::geometry::Point;

pub use graph::{build_context_graph, ContextGraph, EdgeSet, NodeType, RadiusConfig};
pub use road::{road_travel_time, RoadEdge, RoadNetwork};

/// Version tag written into every scenario file.
pub const FORMAT_VERSION: u32 = 1;

/// Tasks closer than this to a road node are resampled.
pub const MIN_SEPARATION_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub width_m: f64,
    pub height_m: f64,
}

impl Area {
    pub fn contains(&self, p: &Point) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.width_m && p.y <= self.height_m
    }

    pub fn diagonal(&self) -> f64 {
        self.width_m.hypot(self.height_m)
    }
}

impl Default for Area {
    fn default() -> Self {
        Self { width_m: 10_000.0, height_m: 10_000.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPoint {
    pub index: usize,
    pub position: Point,
    #[serde(default)]
    pub visited: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fleet {
    pub n_uav: usize,
    pub n_ugv: usize,
    pub uav_speed_mps: f64,
    pub ugv_speed_mps: f64,
    pub uav_capacity_j: f64,
    pub ugv_capacity_j: f64,
}

impl Default for Fleet {
    fn default() -> Self {
        Self {
            n_uav: 1,
            n_ugv: 1,
            uav_speed_mps: 10.0,
            ugv_speed_mps: 4.5,
            uav_capacity_j: 287_700.0,
            ugv_capacity_j: 36_810_000.0,
        }
    }
}

/// Static mission description. Immutable once built; share it freely across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub format_version: u32,
    pub id: String,
    pub rng_seed: u64,
    /// Time a UAV spends docked while its battery is restored.
    #[serde(default)]
    pub recharge_seconds: f64,
    pub area: Area,
    pub depot: Point,
    pub fleet: Fleet,
    pub energy: EnergyModelParams,
    pub road: RoadNetwork,
    pub tasks: Vec<TaskPoint>,
}

impl Scenario {
    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.road.len()
    }

    /// Road node the depot sits on.
    pub fn depot_node(&self) -> usize {
        self.road
            .nodes()
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.dist(&self.depot).total_cmp(&b.1.dist(&self.depot)).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    pub fn task_position(&self, task: usize) -> Point {
        self.tasks[task].position
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Validation(msg));
        if self.format_version != FORMAT_VERSION {
            return fail(format!("unsupported format_version {}", self.format_version));
        }
        if !(self.area.width_m > 0.0 && self.area.height_m > 0.0) {
            return fail("area must have positive width and height".into());
        }
        if self.tasks.is_empty() {
            return fail("scenario has no tasks".into());
        }
        if self.road.is_empty() {
            return fail("road network has no nodes".into());
        }
        for (i, t) in self.tasks.iter().enumerate() {
            if t.index != i {
                return fail(format!("task at position {i} has index {}", t.index));
            }
            if !t.position.is_finite() || !self.area.contains(&t.position) {
                return fail(format!("task {i} at {} lies outside the area", t.position));
            }
        }
        for (i, p) in self.road.nodes().iter().enumerate() {
            if !p.is_finite() || !self.area.contains(p) {
                return fail(format!("road node {i} at {} lies outside the area", p));
            }
        }
        if !self.road.is_connected() {
            return fail("road network is not connected".into());
        }
        if self.road.nodes()[self.depot_node()].dist(&self.depot) > 1e-9 {
            return fail(format!("depot {} does not coincide with a road node", self.depot));
        }
        let f = &self.fleet;
        if f.n_uav == 0 || f.n_ugv == 0 {
            return fail("fleet needs at least one UAV and one UGV".into());
        }
        if !(f.uav_speed_mps > 0.0 && f.ugv_speed_mps > 0.0) {
            return fail("fleet speeds must be positive".into());
        }
        if !(f.uav_capacity_j > 0.0 && f.ugv_capacity_j > 0.0) {
            return fail("fleet energy capacities must be positive".into());
        }
        if !(self.recharge_seconds >= 0.0 && self.recharge_seconds.is_finite()) {
            return fail("recharge_seconds must be a finite non-negative number".into());
        }
        self.energy.validate()?;
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize scenario {}: {e}", self.id)))
    }

    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        let scenario: Scenario =
            toml::from_str(text).map_err(|e| Error::Parse { path: origin.to_string(), message: e.message().to_string() })?;
        scenario.validate()?;
        Ok(scenario)
    }
}

pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, scenario.to_toml()?)?;
    Ok(())
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    Scenario::from_toml(&text, &path.display().to_string())
}

/// Parameters of the random instance generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub n_tasks: usize,
    pub n_road_nodes: usize,
    pub area: Area,
    pub fleet: Fleet,
    pub energy: EnergyModelParams,
    /// Neighbours linked per road node before the connectivity pass.
    pub road_k: usize,
    pub recharge_seconds: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_tasks: 15,
            n_road_nodes: 5,
            area: Area::default(),
            fleet: Fleet::default(),
            energy: EnergyModelParams::default(),
            road_k: 3,
            recharge_seconds: 0.0,
        }
    }
}

impl GenConfig {
    /// `tasks` task points and `paths` road nodes with a 1 UAV / 1 UGV team.
    pub fn preset(tasks: usize, paths: usize) -> Self {
        Self { n_tasks: tasks, n_road_nodes: paths, ..Self::default() }
    }

    pub fn with_team(mut self, n_uav: usize, n_ugv: usize) -> Self {
        self.fleet.n_uav = n_uav;
        self.fleet.n_ugv = n_ugv;
        self
    }

    /// Parses mission labels such as `T15-P5`.
    pub fn from_label(label: &str) -> Result<Self> {
        let bad = || Error::Config(format!("mission label {label:?} is not of the form T<tasks>-P<paths>"));
        let (t, p) = label.split_once('-').ok_or_else(bad)?;
        let tasks = t.strip_prefix('T').and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let paths = p.strip_prefix('P').and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        Ok(Self::preset(tasks, paths))
    }

    pub fn label(&self) -> String {
        format!("T{}-P{}", self.n_tasks, self.n_road_nodes)
    }
}

/// Deterministic random instance: road nodes first (node 0 is the depot), then tasks, each
/// rejection-sampled to keep [`MIN_SEPARATION_M`] from every road node. Tasks a UAV could not
/// reach and leave again from their nearest road node are resampled too, so every generated
/// mission has at least one feasible plan.
pub fn generate_scenario(config: &GenConfig, seed: u64) -> Result<Scenario> {
    if config.n_tasks == 0 {
        return Err(Error::Config("n_tasks must be at least 1".into()));
    }
    if config.n_road_nodes == 0 {
        return Err(Error::Config("n_road_nodes must be at least 1".into()));
    }
    let area = config.area;
    if !(area.width_m > 2.0 * MIN_SEPARATION_M && area.height_m > 2.0 * MIN_SEPARATION_M) {
        return Err(Error::Config("area is too small".into()));
    }
    let fleet = &config.fleet;
    let round_trip = fleet.uav_capacity_j / config.energy.uav_power(fleet.uav_speed_mps)? * fleet.uav_speed_mps;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = |rng: &mut ChaCha8Rng| Point::new(rng.gen_range(0.0..area.width_m), rng.gen_range(0.0..area.height_m));

    let mut nodes: Vec<Point> = Vec::with_capacity(config.n_road_nodes);
    while nodes.len() < config.n_road_nodes {
        let p = sample(&mut rng);
        if nodes.iter().all(|q| q.dist(&p) >= MIN_SEPARATION_M) {
            nodes.push(p);
        }
    }
    let mut tasks = Vec::with_capacity(config.n_tasks);
    let mut attempts = 0u64;
    while tasks.len() < config.n_tasks {
        attempts += 1;
        if attempts > 1_000_000 {
            return Err(Error::Config("road nodes leave too little of the area within UAV range".into()));
        }
        let p = sample(&mut rng);
        let nearest = nodes.iter().map(|q| q.dist(&p)).fold(f64::INFINITY, f64::min);
        if nearest >= MIN_SEPARATION_M && 2.0 * nearest <= round_trip {
            tasks.push(TaskPoint { index: tasks.len(), position: p, visited: false });
        }
    }
    let depot = nodes[0];
    let road = RoadNetwork::knn_connected(nodes, config.road_k);
    let scenario = Scenario {
        format_version: FORMAT_VERSION,
        id: format!("{}-U{}G{}-s{}", config.label(), config.fleet.n_uav, config.fleet.n_ugv, seed),
        rng_seed: seed,
        recharge_seconds: config.recharge_seconds,
        area,
        depot,
        fleet: config.fleet,
        energy: config.energy,
        road,
        tasks,
    };
    scenario.validate()?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let cfg = GenConfig::preset(15, 5);
        let a = generate_scenario(&cfg, 7).unwrap().to_toml().unwrap();
        let b = generate_scenario(&cfg, 7).unwrap().to_toml().unwrap();
        assert_eq!(a, b);
        let c = generate_scenario(&cfg, 8).unwrap().to_toml().unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn full_scale_config_fits_area() {
        let cfg = GenConfig::from_label("T45-P10").unwrap();
        for seed in 0..5 {
            let s = generate_scenario(&cfg, seed).unwrap();
            assert_eq!(s.n_tasks(), 45);
            assert_eq!(s.n_nodes(), 10);
            assert!(s.tasks.iter().all(|t| s.area.contains(&t.position)));
            assert!(s.road.nodes().iter().all(|p| s.area.contains(p)));
            assert!(s.road.is_connected());
        }
    }

    #[test]
    fn tasks_keep_clear_of_roads() {
        let cfg = GenConfig::preset(40, 10);
        let s = generate_scenario(&cfg, 3).unwrap();
        for t in &s.tasks {
            assert!(s.road.nodes().iter().all(|p| p.dist(&t.position) >= MIN_SEPARATION_M));
        }
    }

    #[test]
    fn rejects_empty_configs() {
        assert!(generate_scenario(&GenConfig::preset(0, 3), 0).is_err());
        assert!(generate_scenario(&GenConfig::preset(3, 0), 0).is_err());
    }

    #[test]
    fn label_round_trip() {
        let cfg = GenConfig::from_label("T6-P3").unwrap();
        assert_eq!((cfg.n_tasks, cfg.n_road_nodes), (6, 3));
        assert_eq!(cfg.label(), "T6-P3");
        assert!(GenConfig::from_label("6-3").is_err());
    }

    #[test]
    fn missing_fleet_is_named() {
        let s = generate_scenario(&GenConfig::preset(2, 2), 1).unwrap();
        let text = s.to_toml().unwrap();
        let mut value: toml::Table = toml::from_str(&text).unwrap();
        value.remove("fleet");
        let err = Scenario::from_toml(&toml::to_string(&value).unwrap(), "mem").unwrap_err();
        assert!(err.to_string().contains("missing field `fleet`"), "{err}");
    }

    #[test]
    fn task_outside_area_is_rejected() {
        let mut s = generate_scenario(&GenConfig::preset(2, 2), 1).unwrap();
        s.tasks[1].position = Point::new(-5.0, 10.0);
        let err = Scenario::from_toml(&s.to_toml().unwrap(), "mem").unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("task 1")), "{err}");
    }
}
