use copcs_core::scenario::{generate_scenario, load_scenario, road_travel_time, save_scenario, GenConfig, Scenario};

const GOLDEN_T1: &str = include_str!("golden/t1-p1-seed0.toml");

#[test]
fn t1_p1_seed0_matches_golden() {
    let s = generate_scenario(&GenConfig::preset(1, 1), 0).unwrap();
    assert_eq!(s.n_tasks(), 1);
    assert_eq!(s.n_nodes(), 1);
    assert_eq!(s.road.nodes()[0], s.depot);
    assert_eq!(s.to_toml().unwrap(), GOLDEN_T1);
    assert_eq!(Scenario::from_toml(GOLDEN_T1, "golden").unwrap(), s);
}

#[test]
fn save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for (tasks, paths, seed) in [(15, 5, 7), (45, 10, 3), (6, 3, 11)] {
        let s = generate_scenario(&GenConfig::preset(tasks, paths).with_team(2, 2), seed).unwrap();
        let path = dir.path().join(format!("{tasks}-{seed}.toml"));
        save_scenario(&s, &path).unwrap();
        assert_eq!(load_scenario(&path).unwrap(), s);
    }
}

#[test]
fn full_scale_instance_shape() {
    let s = generate_scenario(&GenConfig::preset(45, 10), 21).unwrap();
    assert_eq!((s.n_tasks(), s.n_nodes()), (45, 10));
    assert_eq!((s.area.width_m, s.area.height_m), (10_000.0, 10_000.0));
    assert!(s.tasks.iter().all(|t| s.area.contains(&t.position)));
}

#[test]
fn road_times_are_a_metric() {
    for seed in 0..5 {
        let s = generate_scenario(&GenConfig::preset(3, 8), seed).unwrap();
        let n = s.n_nodes();
        let t = |a, b| road_travel_time(&s.road, a, b, 4.5).unwrap();
        for a in 0..n {
            for b in 0..n {
                assert!((t(a, b) - t(b, a)).abs() < 1e-9);
                for c in 0..n {
                    assert!(t(a, c) <= t(a, b) + t(b, c) + 1e-9);
                }
            }
        }
    }
}
