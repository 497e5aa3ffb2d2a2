use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

/// One undirected road segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadEdge {
    pub a: usize,
    pub b: usize,
    pub length_m: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RoadNetworkRepr {
    nodes: Vec<Point>,
    edges: Vec<RoadEdge>,
}

/// Undirected road graph over path-center points. UGVs only ever stand on these nodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RoadNetworkRepr", into = "RoadNetworkRepr")]
pub struct RoadNetwork {
    nodes: Vec<Point>,
    edges: Vec<RoadEdge>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl PartialEq for RoadNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges
    }
}

impl TryFrom<RoadNetworkRepr> for RoadNetwork {
    type Error = String;

    fn try_from(repr: RoadNetworkRepr) -> std::result::Result<Self, String> {
        RoadNetwork::new(repr.nodes, repr.edges).map_err(|e| e.to_string())
    }
}

impl From<RoadNetwork> for RoadNetworkRepr {
    fn from(road: RoadNetwork) -> Self {
        RoadNetworkRepr { nodes: road.nodes, edges: road.edges }
    }
}

impl RoadNetwork {
    /// Builds the network, checking indices, lengths and duplicate or self edges.
    pub fn new(nodes: Vec<Point>, edges: Vec<RoadEdge>) -> Result<Self> {
        let n = nodes.len();
        let mut adjacency = vec![Vec::new(); n];
        for e in &edges {
            if e.a >= n || e.b >= n {
                return Err(Error::Validation(format!("road edge ({}, {}) references a missing node", e.a, e.b)));
            }
            if e.a == e.b {
                return Err(Error::Validation(format!("road edge ({}, {}) is a self loop", e.a, e.b)));
            }
            let euclid = nodes[e.a].dist(&nodes[e.b]);
            if !(e.length_m - euclid).abs().le(&(1e-6 * euclid.max(1.0))) {
                return Err(Error::Validation(format!(
                    "road edge ({}, {}) has length {} m but its endpoints are {} m apart",
                    e.a, e.b, e.length_m, euclid
                )));
            }
            if adjacency[e.a].iter().any(|&(m, _)| m == e.b) {
                return Err(Error::Validation(format!("duplicate road edge ({}, {})", e.a, e.b)));
            }
            adjacency[e.a].push((e.b, e.length_m));
            adjacency[e.b].push((e.a, e.length_m));
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(m, _)| m);
        }
        Ok(Self { nodes, edges, adjacency })
    }

    /// Connects every node to its `k` nearest neighbours, then joins components with the
    /// shortest available edges until the graph is connected.
    pub fn knn_connected(nodes: Vec<Point>, k: usize) -> Self {
        let n = nodes.len();
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for i in 0..n {
            let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            order.sort_by(|&a, &b| nodes[i].dist(&nodes[a]).total_cmp(&nodes[i].dist(&nodes[b])).then(a.cmp(&b)));
            for &j in order.iter().take(k) {
                pairs.push((i.min(j), i.max(j)));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();

        let mut uf = UnionFind::new(n);
        for &(a, b) in &pairs {
            uf.union(a, b);
        }
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                candidates.push((nodes[a].dist(&nodes[b]), a, b));
            }
        }
        candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        for (_, a, b) in candidates {
            if uf.union(a, b) {
                pairs.push((a, b));
            }
        }
        pairs.sort_unstable();

        let edges = pairs
            .into_iter()
            .map(|(a, b)| RoadEdge { a, b, length_m: nodes[a].dist(&nodes[b]) })
            .collect();
        Self::new(nodes, edges).expect("generated road network is well formed")
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn edges(&self) -> &[RoadEdge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Neighbours of `node` with edge lengths, sorted by neighbour index.
    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.adjacency[node]
    }

    pub fn edge_length(&self, a: usize, b: usize) -> Option<f64> {
        self.adjacency.get(a)?.iter().find(|&&(m, _)| m == b).map(|&(_, len)| len)
    }

    pub fn is_connected(&self) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        self.distances_from(0).iter().all(|d| d.is_finite())
    }

    /// Dijkstra distances in meters; unreachable nodes are `f64::INFINITY`.
    pub fn distances_from(&self, source: usize) -> Vec<f64> {
        self.dijkstra(source).0
    }

    fn dijkstra(&self, source: usize) -> (Vec<f64>, Vec<Option<usize>>) {
        let n = self.nodes.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut prev = vec![None; n];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Frontier { cost: 0.0, node: source });
        while let Some(Frontier { cost, node }) = heap.pop() {
            if cost > dist[node] {
                continue;
            }
            for &(next, len) in &self.adjacency[node] {
                let c = cost + len;
                if c < dist[next] {
                    dist[next] = c;
                    prev[next] = Some(node);
                    heap.push(Frontier { cost: c, node: next });
                }
            }
        }
        (dist, prev)
    }

    /// Shortest road path `from ..= to` as node indices.
    pub fn shortest_path(&self, from: usize, to: usize) -> Result<Vec<usize>> {
        let (dist, prev) = self.dijkstra(from);
        if !dist[to].is_finite() {
            return Err(Error::Unreachable { from, to });
        }
        let mut path = vec![to];
        let mut cur = to;
        while let Some(p) = prev[cur] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        Ok(path)
    }

    /// All-pairs shortest road distances in meters.
    pub fn distance_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.nodes.len()).map(|s| self.distances_from(s)).collect()
    }
}

/// Shortest-path travel time between two road nodes at constant `speed_mps`.
pub fn road_travel_time(road: &RoadNetwork, a: usize, b: usize, speed_mps: f64) -> Result<f64> {
    let n = road.len();
    if a >= n || b >= n {
        return Err(Error::Config(format!("road node index out of range ({a}, {b}) for {n} nodes")));
    }
    if !(speed_mps > 0.0) {
        return Err(Error::Config(format!("speed must be positive, got {speed_mps}")));
    }
    if a == b {
        return Ok(0.0);
    }
    let d = road.distances_from(a)[b];
    if !d.is_finite() {
        return Err(Error::Unreachable { from: a, to: b });
    }
    Ok(d / speed_mps)
}

#[derive(Copy, Clone, PartialEq)]
struct Frontier {
    cost: f64,
    node: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}
