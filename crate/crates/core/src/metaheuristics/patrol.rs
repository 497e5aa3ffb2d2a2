use crate::scenario::Scenario;

/// Nearest-neighbour patrol tours, one per UGV, as cyclic waypoint sequences.
///
/// Road nodes are split by index into contiguous, equally sized shares. Each tour starts at the
/// share node closest to the depot by road and repeatedly moves on to the closest unvisited
/// share node. A UGV with an empty share stays at the depot.
pub fn fixed_ugv_route(scenario: &Scenario) -> Vec<Vec<usize>> {
    let dist = scenario.road.distance_matrix();
    let n = scenario.n_nodes();
    let g = scenario.fleet.n_ugv;
    let depot = scenario.depot_node();
    (0..g)
        .map(|j| {
            let share: Vec<usize> = (j * n / g..(j + 1) * n / g).collect();
            if share.is_empty() {
                return vec![depot];
            }
            let closest = |from: usize, pool: &[usize]| {
                pool.iter().copied().min_by(|&a, &b| dist[from][a].total_cmp(&dist[from][b]).then(a.cmp(&b))).unwrap()
            };
            let mut left = share.clone();
            let mut tour = vec![closest(depot, &left)];
            left.retain(|&x| x != tour[0]);
            while !left.is_empty() {
                let next = closest(*tour.last().unwrap(), &left);
                left.retain(|&x| x != next);
                tour.push(next);
            }
            tour
        })
        .collect()
}

/// Road length of a closed tour.
pub fn tour_length(scenario: &Scenario, tour: &[usize]) -> f64 {
    let dist = scenario.road.distance_matrix();
    (0..tour.len()).map(|k| dist[tour[k]][tour[(k + 1) % tour.len()]]).sum()
}

/// A tour expanded into single road hops: a lead-in from the depot to the first waypoint, then
/// a closed walk repeated forever.
#[derive(Debug, Clone, PartialEq)]
pub struct Patrol {
    /// Depot node followed by the lead-in hops; its last entry is the first cycle node.
    pub lead_in: Vec<usize>,
    /// Closed walk; the hop after the last entry returns to the first.
    pub cycle: Vec<usize>,
}

impl Patrol {
    pub fn new(scenario: &Scenario, tour: &[usize]) -> crate::Result<Self> {
        let road = &scenario.road;
        let lead_in = road.shortest_path(scenario.depot_node(), tour[0])?;
        let mut cycle = vec![tour[0]];
        if tour.len() > 1 {
            for k in 0..tour.len() {
                let path = road.shortest_path(tour[k], tour[(k + 1) % tour.len()])?;
                cycle.extend_from_slice(&path[1..]);
            }
            cycle.pop();
        }
        Ok(Self { lead_in, cycle })
    }

    /// Node after `k` hops.
    pub fn node_at(&self, k: usize) -> usize {
        let l = self.lead_in.len() - 1;
        if k <= l {
            self.lead_in[k]
        } else {
            self.cycle[(k - l) % self.cycle.len()]
        }
    }

    pub fn is_stationary_after(&self, k: usize) -> bool {
        self.cycle.len() == 1 && k + 1 >= self.lead_in.len()
    }

    /// Number of hops after which every node of the patrol has been passed at least once more.
    pub fn horizon(&self) -> usize {
        self.lead_in.len() + self.cycle.len()
    }

    /// Every node the UGV ever stands on, sorted.
    pub fn nodes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.lead_in.iter().chain(&self.cycle).copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}
