use copcs_core::dynamics::execute_plan;
use copcs_core::metaheuristics::*;
use copcs_core::oracle::{enumerate, solve_exact, Budget};
use copcs_core::scenario::{generate_scenario, Area, Fleet, GenConfig, RoadEdge, RoadNetwork, Scenario, TaskPoint, FORMAT_VERSION};
use copcs_core::Point;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn hand(nodes: &[(f64, f64)], edges: &[(usize, usize)], tasks: &[(f64, f64)], n_uav: usize, n_ugv: usize) -> Scenario {
    let pts: Vec<Point> = nodes.iter().map(|&(x, y)| Point::new(x, y)).collect();
    let edges = edges.iter().map(|&(a, b)| RoadEdge { a, b, length_m: pts[a].dist(&pts[b]) }).collect();
    Scenario {
        format_version: FORMAT_VERSION,
        id: "hand".into(),
        rng_seed: 0,
        recharge_seconds: 0.0,
        area: Area { width_m: 20_000.0, height_m: 20_000.0 },
        depot: pts[0],
        fleet: Fleet { n_uav, n_ugv, ..Fleet::default() },
        energy: Default::default(),
        road: RoadNetwork::new(pts, edges).unwrap(),
        tasks: tasks.iter().enumerate().map(|(i, &(x, y))| TaskPoint { index: i, position: Point::new(x, y), visited: false }).collect(),
    }
}

fn t6(seed: u64) -> Scenario {
    generate_scenario(&GenConfig::preset(6, 3).with_team(2, 1), seed).unwrap()
}

#[test]
fn patrol_shares() {
    let s = hand(&[(10_000.0, 10_000.0)], &[], &[(10_100.0, 10_000.0)], 1, 1);
    assert_eq!(fixed_ugv_route(&s), vec![vec![0]]);
    let square = [(0.0, 0.0), (1000.0, 0.0), (1000.0, 1000.0), (0.0, 1000.0)];
    let s = hand(&square, &[(0, 1), (1, 2), (2, 3), (3, 0)], &[(500.0, 500.0)], 1, 2);
    let tours = fixed_ugv_route(&s);
    assert_eq!(tours.len(), 2);
    assert!(tours.iter().all(|t| t.len() == 2));
    assert_eq!(tours.concat().len(), 4);
    let s = hand(&square, &[(0, 1), (1, 2), (2, 3), (3, 0)], &[(500.0, 500.0)], 1, 5);
    let tours = fixed_ugv_route(&s);
    assert_eq!(tours.len(), 5);
    assert_eq!(tours.iter().filter(|t| **t == vec![0]).count(), 2, "{tours:?}");
    let mut covered = tours.concat();
    covered.sort_unstable();
    covered.dedup();
    assert_eq!(covered, vec![0, 1, 2, 3]);
}

/// Floyd-Warshall distances and a plain nearest-neighbour tour from the node closest to the depot.
fn brute_nn_length(s: &Scenario) -> f64 {
    let n = s.n_nodes();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for e in s.road.edges() {
        d[e.a][e.b] = e.length_m;
        d[e.b][e.a] = e.length_m;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    let mut cur = 0;
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut total = 0.0;
    for _ in 1..n {
        let next = (0..n).filter(|&j| !seen[j]).min_by(|&a, &b| d[cur][a].total_cmp(&d[cur][b])).unwrap();
        total += d[cur][next];
        seen[next] = true;
        cur = next;
    }
    total + d[cur][0]
}

#[test]
fn tour_matches_brute_force_nearest_neighbour() {
    for seed in 0..20 {
        let s = generate_scenario(&GenConfig::preset(3, 5), seed).unwrap();
        let tour = &fixed_ugv_route(&s)[0];
        assert_eq!(tour[0], s.depot_node());
        assert!((tour_length(&s, tour) - brute_nn_length(&s)).abs() < 1e-6, "seed {seed}");
    }
}

#[test]
fn patrol_walk_is_adjacent() {
    for seed in 0..10 {
        let s = generate_scenario(&GenConfig::preset(3, 6).with_team(1, 2), seed).unwrap();
        for tour in fixed_ugv_route(&s) {
            let p = Patrol::new(&s, &tour).unwrap();
            for k in 0..3 * p.horizon() {
                let (a, b) = (p.node_at(k), p.node_at(k + 1));
                assert!(a == b || s.road.edge_length(a, b).is_some(), "hop {a}->{b}");
            }
        }
    }
}

#[test]
fn single_task_single_leg() {
    let s = hand(&[(0.0, 0.0)], &[], &[(1000.0, 0.0)], 1, 1);
    let sol = initial_solution(&s).unwrap();
    assert_eq!(sol.routes, vec![vec![Stop::Task(0)]]);
    assert!((sol.makespan_s - 100.0).abs() < 1e-9);
}

#[test]
fn out_of_range_task_errors() {
    let s = hand(&[(0.0, 0.0)], &[], &[(15_000.0, 0.0)], 1, 1);
    assert!(initial_solution(&s).is_err());
}

#[test]
fn repair_leaves_feasible_routes_alone() {
    let s = hand(&[(0.0, 0.0)], &[], &[(1000.0, 0.0), (1000.0, 1000.0)], 1, 1);
    let routes = vec![vec![Stop::Task(1), Stop::Task(0)]];
    assert_eq!(repair_recharges(&s, &routes).unwrap(), routes);
}

#[test]
fn repair_inserts_exactly_one_stop() {
    let s = hand(&[(10_000.0, 10_000.0)], &[], &[(10_000.0, 16_000.0), (10_000.0, 4_000.0)], 1, 1);
    let repaired = repair_recharges(&s, &[vec![Stop::Task(0), Stop::Task(1)]]).unwrap();
    assert_eq!(repaired, vec![vec![Stop::Task(0), Stop::Recharge { ugv: 0, node: 0 }, Stop::Task(1)]]);
    let ctx = RouteContext::new(&s).unwrap();
    execute_plan(&s, &ctx.plan(&ctx.evaluate(repaired).unwrap()).unwrap()).unwrap();
}

#[test]
fn zero_capacity_cannot_be_repaired() {
    let mut s = hand(&[(0.0, 0.0)], &[], &[(1000.0, 0.0)], 1, 1);
    s.fleet.uav_capacity_j = 0.0;
    assert!(repair_recharges(&s, &[vec![Stop::Task(0)]]).is_err());
}

#[test]
fn initial_solutions_execute() {
    for seed in 0..20 {
        let s = t6(seed);
        let ctx = RouteContext::new(&s).unwrap();
        let sol = ctx.initial_solution().unwrap();
        let mut tasks: Vec<usize> = sol.task_routes().concat();
        tasks.sort_unstable();
        assert_eq!(tasks, (0..6).collect::<Vec<_>>());
        let trace = execute_plan(&s, &ctx.plan(&sol).unwrap()).unwrap();
        assert_eq!(trace.metrics().makespan_s, sol.makespan_s);
    }
}

#[test]
fn neighborhood_sizes() {
    assert!(neighborhood(&[vec![0]]).is_empty());
    let moves = neighborhood(&[vec![0, 1, 2]]);
    let two_opt = moves.iter().filter(|m| matches!(m, Move::TwoOpt { .. })).count();
    let relocate = moves.iter().filter(|m| matches!(m, Move::Relocate { .. })).count();
    assert_eq!((two_opt, relocate, moves.len()), (3, 6, 9));
    // Between routes: 2 relocations of the lone task into [0, 1] positions 0..=2, 2 relocations
    // out of the pair, 2 swaps.
    let moves = neighborhood(&[vec![0, 1], vec![2]]);
    assert_eq!(moves.iter().filter(|m| matches!(m, Move::Swap { .. })).count(), 2);
    assert_eq!(moves.len(), 1 + 2 + 2 * 2 + 3 + 2);
}

#[test]
fn candidates_are_feasible_or_discarded() {
    let s = t6(3);
    let ctx = RouteContext::new(&s).unwrap();
    let start = ctx.initial_solution().unwrap().task_routes();
    for mv in neighborhood(&start) {
        let cand = apply_move(&start, mv);
        if let Ok(sol) = ctx.solve_routes(&cand) {
            let trace = execute_plan(&s, &ctx.plan(&sol).unwrap()).unwrap();
            assert_eq!(trace.metrics().makespan_s, sol.makespan_s);
        }
    }
}

fn quick() -> MetaParams {
    MetaParams { max_iters: 300, ..MetaParams::default() }
}

#[test]
fn solvers_are_anytime_feasible_and_deterministic() {
    for seed in 0..4 {
        let s = t6(seed);
        for method in [Method::Gls, Method::Ts, Method::Sa] {
            let params = MetaParams { seed: 7, ..quick() };
            let r = solve(&s, method, &params).unwrap();
            assert!(r.solution.makespan_s <= r.initial_makespan_s);
            assert_eq!(r.log.len(), params.max_iters + 1);
            assert!(r.log.windows(2).all(|w| w[1].1 <= w[0].1), "{method} log not monotone");
            let trace = execute_plan(&s, &r.plan).unwrap();
            assert_eq!(trace.metrics().makespan_s, r.solution.makespan_s);
            assert_eq!(solve(&s, method, &params).unwrap(), r);
            assert!(r.log_csv().starts_with("iter,incumbent_s\n0,"));
        }
    }
}

#[test]
fn one_task_matches_oracle() {
    let s = generate_scenario(&GenConfig::preset(1, 2), 5).unwrap();
    let opt = solve_exact(&s, Budget::default()).unwrap().makespan_s;
    for method in [Method::Gls, Method::Ts, Method::Sa] {
        assert_eq!(solve(&s, method, &quick()).unwrap().solution.makespan_s, opt, "{method}");
    }
}

#[test]
fn small_suite_gap_to_enumeration() {
    let mut hits = [0usize; 3];
    let n = 10;
    for seed in 0..n {
        let s = generate_scenario(&GenConfig::preset(4, 2), seed).unwrap();
        let opt = enumerate(&s, 1_000_000).unwrap().makespan_s.unwrap();
        for (k, method) in [Method::Gls, Method::Ts, Method::Sa].into_iter().enumerate() {
            let ms = solve(&s, method, &quick()).unwrap().solution.makespan_s;
            assert!(ms >= opt - 1e-6);
            if ms <= opt + 1e-6 {
                hits[k] += 1;
            }
        }
    }
    println!("T4-P2 instances solved to the enumerated optimum (gls, ts, sa): {hits:?} of {n}");
}

#[test]
fn metropolis_frequency_within_three_sigma() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for (delta, temp) in [(1.0, 1.0), (50.0, 100.0), (3.0, 1.0)] {
        let n = 10_000;
        let hits = (0..n).filter(|_| metropolis_accept(delta, temp, &mut rng)).count();
        let p: f64 = (-delta / temp).exp();
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((hits as f64 - n as f64 * p).abs() <= 3.0 * sigma, "delta {delta} T {temp}: {hits}");
    }
    assert!(metropolis_accept(-1.0, 0.0, &mut rng));
}

proptest! {
    #[test]
    fn augmented_cost_dominates_true_cost(
        routes in prop::collection::vec(prop::collection::vec(0usize..6, 0..4), 1..3),
        bumps in prop::collection::vec((0usize..3, proptest::option::of(0usize..6), 0usize..6, 1u32..4), 0..6),
        cost in 0.0f64..5000.0,
    ) {
        let mut pen = GlsPenalties { lambda: 2.5, ..Default::default() };
        for (u, p, t, c) in bumps {
            pen.counts.insert((u, p, t), c);
        }
        let aug = pen.augmented(&routes, cost);
        prop_assert!(aug >= cost);
        let used_penalized = features(&routes).iter().any(|f| pen.counts.get(f).copied().unwrap_or(0) > 0);
        prop_assert_eq!(aug == cost, !used_penalized);
    }
}
