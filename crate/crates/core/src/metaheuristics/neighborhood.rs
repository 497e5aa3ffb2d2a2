/// A local move on task-only routes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Move {
    /// Reverse `routes[uav][i..=j]`.
    TwoOpt { uav: usize, i: usize, j: usize },
    /// Take the task at `routes[from][i]` and insert it at position `j` of `routes[to]`, indexed
    /// after the removal.
    Relocate { from: usize, i: usize, to: usize, j: usize },
    /// Exchange `routes[a][i]` and `routes[b][j]` with `a < b`.
    Swap { a: usize, i: usize, b: usize, j: usize },
}

/// Every 2-opt reversal within a route, every single-task relocation within or between routes
/// and every pairwise swap between routes.
pub fn neighborhood(routes: &[Vec<usize>]) -> Vec<Move> {
    let mut out = Vec::new();
    for (uav, r) in routes.iter().enumerate() {
        for i in 0..r.len() {
            for j in i + 1..r.len() {
                out.push(Move::TwoOpt { uav, i, j });
            }
        }
    }
    for (from, r) in routes.iter().enumerate() {
        for i in 0..r.len() {
            for (to, s) in routes.iter().enumerate() {
                if to == from {
                    for j in 0..r.len() {
                        if j != i {
                            out.push(Move::Relocate { from, i, to, j });
                        }
                    }
                } else {
                    for j in 0..=s.len() {
                        out.push(Move::Relocate { from, i, to, j });
                    }
                }
            }
        }
    }
    for a in 0..routes.len() {
        for b in a + 1..routes.len() {
            for i in 0..routes[a].len() {
                for j in 0..routes[b].len() {
                    out.push(Move::Swap { a, i, b, j });
                }
            }
        }
    }
    out
}

pub fn apply_move(routes: &[Vec<usize>], mv: Move) -> Vec<Vec<usize>> {
    let mut out = routes.to_vec();
    match mv {
        Move::TwoOpt { uav, i, j } => out[uav][i..=j].reverse(),
        Move::Relocate { from, i, to, j } => {
            let task = out[from].remove(i);
            out[to].insert(j, task);
        }
        Move::Swap { a, i, b, j } => {
            let t = out[a][i];
            out[a][i] = out[b][j];
            out[b][j] = t;
        }
    }
    out
}

/// Task/UAV pairs a move breaks up; tabu search forbids re-forming them for a while.
pub fn broken_pairs(routes: &[Vec<usize>], mv: Move) -> Vec<(usize, usize)> {
    match mv {
        Move::TwoOpt { uav, i, j } => vec![(routes[uav][i], uav), (routes[uav][j], uav)],
        Move::Relocate { from, i, .. } => vec![(routes[from][i], from)],
        Move::Swap { a, i, b, j } => vec![(routes[a][i], a), (routes[b][j], b)],
    }
}

/// Task/UAV pairs a move forms at new positions.
pub fn formed_pairs(routes: &[Vec<usize>], mv: Move) -> Vec<(usize, usize)> {
    match mv {
        Move::TwoOpt { uav, i, j } => vec![(routes[uav][i], uav), (routes[uav][j], uav)],
        Move::Relocate { from, i, to, .. } => vec![(routes[from][i], to)],
        Move::Swap { a, i, b, j } => vec![(routes[a][i], b), (routes[b][j], a)],
    }
}
