use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::dynamics::WorldState;
use crate::geometry::Point;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeType {
    Task,
    Path,
    Uav,
    Ugv,
}

impl NodeType {
    pub const ALL: [NodeType; 4] = [NodeType::Task, NodeType::Path, NodeType::Uav, NodeType::Ugv];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Connection radii, meters, one per edge set. Boundaries are inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusConfig {
    pub intra_m: f64,
    pub uav_m: f64,
    pub ugv_m: f64,
}

impl RadiusConfig {
    /// Half the area diagonal for every set.
    pub fn for_scenario(scenario: &Scenario) -> Self {
        let r = 0.5 * scenario.area.diagonal();
        Self { intra_m: r, uav_m: r, ugv_m: r }
    }

    pub fn unbounded() -> Self {
        Self { intra_m: f64::INFINITY, uav_m: f64::INFINITY, ugv_m: f64::INFINITY }
    }
}

/// Symmetric binary adjacency over all graph nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSet {
    n: usize,
    bits: Vec<bool>,
}

impl EdgeSet {
    fn new(n: usize) -> Self {
        Self { n, bits: vec![false; n * n] }
    }

    fn link(&mut self, i: usize, j: usize) {
        self.bits[i * self.n + j] = true;
        self.bits[j * self.n + i] = true;
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.n + j]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn edge_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count() / 2
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.contains(i, j))
    }
}

/// Typed context graph. Nodes are laid out as tasks, then paths, then UAVs, then UGVs, each
/// block in index order.
///
/// Features are normalized: coordinates are divided by the area size, UAV energy by the UAV
/// capacity. Task rows are `[x, y, visited]`, path rows `[x, y]`, UAV rows `[x, y, energy]` and
/// UGV rows `[x, y, uav_0.x, uav_0.y, uav_1.x, ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextGraph {
    pub node_types: Vec<NodeType>,
    pub positions: Vec<Point>,
    pub features: Vec<Vec<f64>>,
    pub intra: EdgeSet,
    pub uav: EdgeSet,
    pub ugv: EdgeSet,
    counts: [usize; 4],
}

impl ContextGraph {
    pub fn n_nodes(&self) -> usize {
        self.node_types.len()
    }

    pub fn count(&self, ty: NodeType) -> usize {
        self.counts[ty.index()]
    }

    pub fn offset(&self, ty: NodeType) -> usize {
        self.counts[..ty.index()].iter().sum()
    }

    pub fn range(&self, ty: NodeType) -> Range<usize> {
        let start = self.offset(ty);
        start..start + self.count(ty)
    }

    pub fn task_node(&self, task: usize) -> usize {
        self.offset(NodeType::Task) + task
    }

    pub fn path_node(&self, node: usize) -> usize {
        self.offset(NodeType::Path) + node
    }

    pub fn uav_node(&self, uav: usize) -> usize {
        self.offset(NodeType::Uav) + uav
    }

    pub fn ugv_node(&self, ugv: usize) -> usize {
        self.offset(NodeType::Ugv) + ugv
    }

    /// Feature width of a node type for a team with `n_uav` UAVs.
    pub fn feature_width(ty: NodeType, n_uav: usize) -> usize {
        match ty {
            NodeType::Task => 3,
            NodeType::Path => 2,
            NodeType::Uav => 3,
            NodeType::Ugv => 2 + 2 * n_uav,
        }
    }
}

pub fn build_context_graph(scenario: &Scenario, state: &WorldState, radii: &RadiusConfig) -> ContextGraph {
    let (w, h) = (scenario.area.width_m, scenario.area.height_m);
    let norm = |p: &Point| [p.x / w, p.y / h];

    let mut node_types = Vec::new();
    let mut positions = Vec::new();
    let mut features = Vec::new();

    for (i, task) in scenario.tasks.iter().enumerate() {
        let [x, y] = norm(&task.position);
        node_types.push(NodeType::Task);
        positions.push(task.position);
        features.push(vec![x, y, if state.visited[i] { 1.0 } else { 0.0 }]);
    }
    for p in scenario.road.nodes() {
        let [x, y] = norm(p);
        node_types.push(NodeType::Path);
        positions.push(*p);
        features.push(vec![x, y]);
    }
    for uav in &state.uavs {
        let [x, y] = norm(&uav.pos);
        node_types.push(NodeType::Uav);
        positions.push(uav.pos);
        features.push(vec![x, y, uav.energy / scenario.fleet.uav_capacity_j]);
    }
    let uav_coords: Vec<f64> = state.uavs.iter().flat_map(|u| norm(&u.pos)).collect();
    for ugv in &state.ugvs {
        let [x, y] = norm(&ugv.pos);
        node_types.push(NodeType::Ugv);
        positions.push(ugv.pos);
        let mut f = vec![x, y];
        f.extend_from_slice(&uav_coords);
        features.push(f);
    }

    let n = node_types.len();
    let mut intra = EdgeSet::new(n);
    let mut uav = EdgeSet::new(n);
    let mut ugv = EdgeSet::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = positions[i].dist(&positions[j]);
            let (a, b) = (node_types[i], node_types[j]);
            if a == b && d <= radii.intra_m {
                intra.link(i, j);
            }
            let uav_pair = matches!((a, b), (NodeType::Uav, NodeType::Ugv | NodeType::Task) | (NodeType::Ugv | NodeType::Task, NodeType::Uav));
            if uav_pair && d <= radii.uav_m {
                uav.link(i, j);
            }
            let ugv_pair = matches!((a, b), (NodeType::Ugv, NodeType::Uav | NodeType::Path) | (NodeType::Uav | NodeType::Path, NodeType::Ugv));
            if ugv_pair && d <= radii.ugv_m {
                ugv.link(i, j);
            }
        }
    }

    let mut counts = [0; 4];
    for t in &node_types {
        counts[t.index()] += 1;
    }
    ContextGraph { node_types, positions, features, intra, uav, ugv, counts }
}
