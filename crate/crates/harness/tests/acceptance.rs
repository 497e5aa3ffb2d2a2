//! Acceptance run. Prints one PASS/FAIL line per criterion and exits non-zero if any failed.
//!
//! Pass criterion ids (`A1` .. `A9`) as arguments to run a subset.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::OnceLock;
use std::time::Instant;

use copcs_core::dynamics::policy::GreedyPolicy;
use copcs_core::dynamics::{execute_plan, uav_power, ugv_power, Dynamics, EventKind, Pending, RobotId};
use copcs_core::metaheuristics::{self, metropolis_accept, MetaParams, Method};
use copcs_core::oracle::{build_demonstrations, enumerate, solve_exact, Budget, DatasetConfig, Demonstration, SolveStatus, Split};
use copcs_core::scenario::{build_context_graph, generate_scenario, Fleet, RadiusConfig, RoadEdge, RoadNetwork, Scenario, TaskPoint};
use copcs_core::{Action, ExecutionTrace, GenConfig, JointPlan};
use copcs_neural::gradcheck::max_relative_error;
use copcs_neural::{evaluate, masked_greedy_decode, DecodeMode, EncoderKind, Example, Model, ModelConfig, TrainConfig, Trainer, Vocab};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `Ok(detail)` on pass, `Err(detail)` on failure.
type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn a1() -> Outcome {
    let direct_uav = |q: f64| 0.0461 * q.powi(3) - 0.5834 * q * q - 1.8761 * q + 229.6;
    let direct_ugv = |q: f64| 464.8 * q + 356.3;
    let fleet = Fleet::default();
    let p_uav = uav_power(fleet.uav_speed_mps).unwrap();
    let p_ugv = ugv_power(fleet.ugv_speed_mps).unwrap();
    let endurance = fleet.uav_capacity_j / p_uav;
    let range = endurance * fleet.uav_speed_mps;
    let errors = [
        rel(p_uav, direct_uav(10.0)),
        rel(p_ugv, direct_ugv(4.5)),
        rel(endurance, fleet.uav_capacity_j / direct_uav(10.0)),
        rel(range, 10.0 * fleet.uav_capacity_j / direct_uav(10.0)),
    ];
    // Published figures are rounded to the printed digits.
    let printed = (p_uav - 198.599).abs() < 5e-4 && (p_ugv - 2447.9).abs() < 5e-2 && (endurance - 1448.65).abs() < 5e-3 && (range - 14_486.0).abs() < 0.5;
    let worst = errors.iter().copied().fold(0.0, f64::max);
    check(
        worst <= 1e-6 && printed,
        format!("P_uav(10)={p_uav:.3} W, P_ugv(4.5)={p_ugv:.1} W, endurance {endurance:.2} s, range {range:.0} m, max rel err {worst:.1e}"),
    )
}

fn tiny_scenario(seed: u64) -> Scenario {
    let mut cfg = GenConfig::preset(1 + (seed % 4) as usize, 1 + (seed % 3) as usize).with_team(1 + (seed % 2) as usize, 1 + (seed / 2 % 2) as usize);
    cfg.area.width_m = 5000.0;
    cfg.area.height_m = 5000.0;
    generate_scenario(&cfg, seed).unwrap()
}

fn random_rollout(s: &Scenario, rng: &mut ChaCha8Rng) -> Vec<Action> {
    let d = Dynamics::new(s).unwrap();
    let pending = Pending::all(s);
    let mut state = d.initial_state();
    let mut out = Vec::new();
    while out.len() < 40 && !state.all_visited() {
        let acts = d.valid_actions(&state, &pending);
        if acts.is_empty() {
            break;
        }
        let a = acts[rng.gen_range(0..acts.len())];
        d.apply(&mut state, a, None).unwrap();
        out.push(a);
    }
    out
}

fn conservation_error(s: &Scenario, t: &ExecutionTrace) -> f64 {
    let robots = (0..s.fleet.n_uav).map(RobotId::Uav).chain((0..s.fleet.n_ugv).map(RobotId::Ugv));
    robots
        .map(|robot| {
            let spent: f64 = t.robot_events(robot).map(|e| e.energy_j).sum();
            let (cap, left) = match robot {
                RobotId::Uav(i) => (s.fleet.uav_capacity_j, t.final_state.uavs[i].energy),
                RobotId::Ugv(j) => (s.fleet.ugv_capacity_j, t.final_state.ugvs[j].energy),
            };
            ((cap - left) - spent).abs() / cap
        })
        .fold(0.0, f64::max)
}

fn a2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut accepted, mut rejected, mut worst) = (0, 0, 0.0f64);
    let mut problems = Vec::new();
    let mut seed = 0;
    while accepted < 200 && seed < 5000 {
        let s = tiny_scenario(seed);
        seed += 1;
        let plan = JointPlan::new(random_rollout(&s, &mut rng));
        let Ok(t) = execute_plan(&s, &plan) else {
            rejected += 1;
            continue;
        };
        accepted += 1;
        worst = worst.max(conservation_error(&s, &t));
        for r in &t.rendezvous {
            if r.uav_position != r.ugv_position || r.start != r.uav_arrival.max(r.ugv_arrival) {
                problems.push(format!("seed {}: rendezvous {r:?}", seed - 1));
            }
        }
        let mut visits: Vec<usize> = plan.actions.iter().filter_map(|a| if let Action::UavVisit { task, .. } = a { Some(*task) } else { None }).collect();
        visits.sort_unstable();
        let events = t.events.iter().filter(|e| e.kind == EventKind::Visit).count();
        if visits != (0..s.n_tasks()).collect::<Vec<_>>() || events != s.n_tasks() {
            problems.push(format!("seed {}: visits {visits:?}", seed - 1));
        }
    }
    check(
        accepted == 200 && worst <= 1e-9 && problems.is_empty(),
        format!("{accepted} accepted plans, {rejected} dead-end rollouts rejected, max energy residual {worst:.1e} rel{}", problems.first().map_or(String::new(), |p| format!(", {p}"))),
    )
}

fn a3() -> Outcome {
    let mut mismatches = Vec::new();
    let mut checked = 0;
    let mut seed = 0;
    while checked < 50 {
        let cfg = GenConfig::preset(1 + (seed % 4) as usize, 1 + (seed / 4 % 2) as usize);
        let s = generate_scenario(&cfg, 300 + seed).unwrap();
        seed += 1;
        let e = enumerate(&s, 10_000_000).unwrap();
        assert!(e.complete, "enumeration capped on seed {}", 300 + seed - 1);
        let sol = solve_exact(&s, Budget::default());
        match (sol, e.makespan_s) {
            (Ok(sol), Some(opt)) if sol.status == SolveStatus::Optimal => {
                if sol.makespan_s != opt {
                    mismatches.push(format!("{}: {} vs {opt}", s.id, sol.makespan_s));
                }
            }
            (Err(copcs_core::Error::NoFeasiblePlan(_)), None) => {}
            (sol, opt) => mismatches.push(format!("{}: {:?} vs {opt:?}", s.id, sol.map(|s| s.makespan_s))),
        }
        checked += 1;
    }
    check(mismatches.is_empty(), format!("{checked} instances (T1..T4, P1..P2, 1 UAV / 1 UGV), {} mismatches{}", mismatches.len(), mismatches.first().map_or(String::new(), |m| format!(", first {m}"))))
}

fn a4() -> Outcome {
    let s = generate_scenario(&GenConfig::preset(2, 1), 4).unwrap();
    let sol = solve_exact(&s, Budget::default()).unwrap();
    let ex = Example::new("t2p1", &s, &sol.plan).unwrap();
    let mut lines = Vec::new();
    let mut worst = 0.0f64;
    for (kind, context) in [(EncoderKind::Hgt, DecodeMode::EncodeOnce), (EncoderKind::Hgt, DecodeMode::ReencodeEachStep), (EncoderKind::Mlp, DecodeMode::EncodeOnce)] {
        let m = Model::new(ModelConfig { encoder: kind, d: 16, l_enc: 1, l_dec: 1, max_len: 2 * sol.plan.len(), n_uav: 1, seed: 4, context }).unwrap();
        let g = max_relative_error(&m, &ex, 1e-5).unwrap();
        worst = worst.max(g.max_relative);
        lines.push(format!("{kind:?}/{context:?} {:.1e} over {} entries", g.max_relative, g.n_checked));
    }
    check(worst < 1e-4, lines.join(", "))
}

fn a5() -> Outcome {
    let config = DatasetConfig { generator: GenConfig::preset(4, 2), n_instances: 20, train_fraction: 1.0, base_seed: 500, ..DatasetConfig::default() };
    let (demos, _) = build_demonstrations(&config).unwrap();
    let examples = Example::from_demonstrations(&demos).unwrap();
    let longest = demos.iter().map(|d| d.plan.len()).max().unwrap();
    let model = Model::new(ModelConfig { max_len: 2 * longest, ..ModelConfig::new(EncoderKind::Hgt, 1) }).unwrap();
    let mut trainer = Trainer::new(model, TrainConfig { steps: 2000, batch: 8, ..TrainConfig::default() }).unwrap();
    let mut acc = 0.0;
    while trainer.step < trainer.config.steps {
        trainer.step_once(&examples).unwrap();
        if trainer.step % 50 == 0 {
            acc = evaluate(&trainer.model, &examples).unwrap().1;
            if acc >= 0.99 {
                break;
            }
        }
    }
    let tokens: usize = examples.iter().map(|e| e.tokens.len()).sum();
    check(acc >= 0.99, format!("teacher-forced accuracy {acc:.4} on {tokens} tokens after {} steps at d={}", trainer.step, trainer.model.config.d))
}

/// Held-out T6-P3 suite shared by A6 and A7: 200 train and 50 test demonstrations.
fn t6_dataset() -> &'static [Demonstration] {
    static DATA: OnceLock<Vec<Demonstration>> = OnceLock::new();
    DATA.get_or_init(|| {
        let config = DatasetConfig {
            generator: GenConfig::preset(6, 3).with_team(2, 1),
            n_instances: 250,
            train_fraction: 0.8,
            base_seed: 60_000,
            ..DatasetConfig::default()
        };
        build_demonstrations(&config).unwrap().0
    })
}

fn split(split: Split) -> Vec<Demonstration> {
    t6_dataset().iter().filter(|d| d.split == split).cloned().collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean per-instance relative gap of `ms` over the oracle makespans.
fn gap(ms: &[f64], opt: &[f64]) -> f64 {
    mean(&ms.iter().zip(opt).map(|(m, o)| m / o - 1.0).collect::<Vec<_>>())
}

fn train_a6(kind: EncoderKind, train: &[Demonstration]) -> Model {
    let longest = train.iter().map(|d| d.plan.len()).max().unwrap();
    let model = Model::new(ModelConfig { d: 32, max_len: 2 * longest, context: DecodeMode::ReencodeEachStep, ..ModelConfig::new(kind, 2) }).unwrap();
    let tc = TrainConfig { lr: 1e-3, batch: 8, steps: 2000, seed: 0, augment: true };
    let examples = Example::for_training(train, &tc).unwrap();
    let mut trainer = Trainer::new(model, tc).unwrap();
    trainer.run(&examples).unwrap();
    trainer.model
}

fn a6() -> Outcome {
    let (train, test) = (split(Split::Train), split(Split::Test));
    let opt: Vec<f64> = test.iter().map(|d| d.makespan_s).collect();
    let mut feasible = Vec::new();
    let mut means = Vec::new();
    let mut gaps = Vec::new();
    for kind in [EncoderKind::Hgt, EncoderKind::Mlp] {
        let model = train_a6(kind, &train);
        let ms: Vec<f64> = test
            .iter()
            .filter_map(|d| {
                let plan = masked_greedy_decode(&d.scenario, &model, DecodeMode::ReencodeEachStep).ok()?;
                Some(execute_plan(&d.scenario, &plan).ok()?.metrics().makespan_s)
            })
            .collect();
        feasible.push(ms.len());
        means.push(mean(&ms));
        gaps.push(if ms.len() == test.len() { gap(&ms, &opt) } else { f64::NAN });
    }
    let initial: Vec<f64> = test.iter().map(|d| metaheuristics::initial_solution(&d.scenario).unwrap().makespan_s).collect();
    let greedy: Vec<f64> = test
        .iter()
        .map(|d| {
            let dy = Dynamics::new(&d.scenario).unwrap();
            let (plan, _) = GreedyPolicy::new(&dy).complete(&dy.initial_state()).unwrap();
            execute_plan(&d.scenario, &JointPlan::new(plan)).unwrap().metrics().makespan_s
        })
        .collect();
    let (init_gap, greedy_gap) = (gap(&initial, &opt), gap(&greedy, &opt));
    let all_feasible = feasible.iter().all(|&n| n == test.len());
    let ordered = mean(&opt) <= means[0] && means[0] <= means[1];
    check(
        train.len() == 200 && test.len() == 50 && all_feasible && gaps[0] < init_gap && ordered,
        format!(
            "{}/{} held out; feasible hgt {}/{n}, mlp {}/{n}; mean makespan oracle {:.1}, hgt {:.1}, mlp {:.1}, initial {:.1}, greedy policy {:.1}; gap hgt {:.1}%, mlp {:.1}%, initial {:.1}%, greedy policy {:.1}%; hgt {} mlp",
            train.len(),
            test.len(),
            feasible[0],
            feasible[1],
            mean(&opt),
            means[0],
            means[1],
            mean(&initial),
            mean(&greedy),
            100.0 * gaps[0],
            100.0 * gaps[1],
            100.0 * init_gap,
            100.0 * greedy_gap,
            if means[0] <= means[1] { "<=" } else { ">" },
            n = test.len(),
        ),
    )
}

fn a7() -> Outcome {
    let test = split(Split::Test);
    let opt: Vec<f64> = test.iter().map(|d| d.makespan_s).collect();
    let mut ok = test.len() == 50;
    let mut parts = Vec::new();
    for method in [Method::Gls, Method::Ts, Method::Sa] {
        let mut ms = Vec::new();
        let mut monotone = true;
        for d in &test {
            let Ok(r) = metaheuristics::solve(&d.scenario, method, &MetaParams::default()) else { continue };
            monotone &= r.log.windows(2).all(|w| w[1].1 <= w[0].1);
            if let Ok(t) = execute_plan(&d.scenario, &r.plan) {
                ms.push(t.metrics().makespan_s);
            }
        }
        ok &= ms.len() == test.len() && monotone;
        let g = if ms.len() == test.len() { format!("{:.1}%", 100.0 * gap(&ms, &opt)) } else { "n/a".into() };
        parts.push(format!("{method} feasible {}/{} gap {g}{}", ms.len(), test.len(), if monotone { "" } else { " NOT MONOTONE" }));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (delta, temp) in [(1.0, 1.0), (50.0, 100.0), (3.0, 1.0), (10.0, 40.0)] {
        let n = 10_000;
        let hits = (0..n).filter(|_| metropolis_accept(delta, temp, &mut rng)).count() as f64;
        let p: f64 = (-delta / temp).exp();
        let z = (hits - n as f64 * p) / (n as f64 * p * (1.0 - p)).sqrt();
        ok &= z.abs() <= 3.0;
        parts.push(format!("metropolis d={delta} T={temp} z={z:+.2}"));
    }
    check(ok, parts.join("; "))
}

fn copcs(args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_copcs")).args(args).env_remove("COPCS_OUT_DIR").output().map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(format!("copcs {}: {}", args.join(" "), String::from_utf8_lossy(&o.stderr).trim()))
    }
}

fn pipeline(root: &Path) -> Result<(), String> {
    let p = |name: &str| root.join(name).to_str().unwrap().to_string();
    copcs(&["--seed", "11", "--out", &p("scenario.toml"), "gen", "--tasks", "5", "--paths", "3", "--uavs", "2"])?;
    copcs(&["--seed", "11", "--out", &p("oracle"), "oracle", "--scenario", &p("scenario.toml")])?;
    copcs(&["--seed", "3", "--out", &p("dataset"), "gen", "--dataset", "--tasks", "4", "--paths", "2", "--uavs", "2", "--instances", "16", "--train-fraction", "0.75"])?;
    copcs(&["--seed", "5", "--out", &p("train"), "train", "--dataset", &p("dataset"), "--d", "8", "--steps", "40", "--batch", "4"])?;
    copcs(&["--seed", "5", "--out", &p("mlp"), "train", "--dataset", &p("dataset"), "--encoder", "mlp", "--d", "8", "--steps", "40", "--context", "reencode-each-step"])?;
    copcs(&[
        "--seed",
        "9",
        "--out",
        &p("eval"),
        "eval",
        "--dataset",
        &p("dataset"),
        "--methods",
        "oracle,gls,ts,sa,mlp,copcs",
        "--iters",
        "100",
        "--copcs-checkpoint",
        &p("train/checkpoint.json"),
        "--mlp-checkpoint",
        &p("mlp/checkpoint.json"),
    ])
}

fn files_under(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(files_under(&path));
        } else {
            out.push(path);
        }
    }
    out.sort();
    out
}

fn a8() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    pipeline(&a)?;
    pipeline(&b)?;
    let files: Vec<_> = files_under(&a).into_iter().map(|f| f.strip_prefix(&a).unwrap().to_path_buf()).collect();
    let compared: Vec<_> = files.iter().filter(|f| f.file_name().unwrap() != "timings.csv").collect();
    let differing: Vec<String> =
        compared.iter().filter(|f| std::fs::read(a.join(f)).ok() != std::fs::read(b.join(f)).ok()).map(|f| f.display().to_string()).collect();
    let must = ["scenario.toml", "oracle/oracle.plan", "dataset/manifest.csv", "train/checkpoint.json", "train/loss.csv", "eval/results.csv", "eval/summary.csv"];
    let missing: Vec<&str> = must.iter().copied().filter(|m| !files.iter().any(|f| f == Path::new(m))).collect();
    check(
        differing.is_empty() && missing.is_empty(),
        format!("{} files byte-identical across two runs (timings.csv excluded){}{}", compared.len() - differing.len(), if differing.is_empty() { String::new() } else { format!(", differing {differing:?}") }, if missing.is_empty() { String::new() } else { format!(", missing {missing:?}") }),
    )
}

fn permute(s: &Scenario, task_perm: &[usize], node_perm: &[usize]) -> Scenario {
    let mut inv = vec![0; node_perm.len()];
    for (k, &old) in node_perm.iter().enumerate() {
        inv[old] = k;
    }
    let nodes = node_perm.iter().map(|&o| s.road.nodes()[o]).collect();
    let edges = s.road.edges().iter().map(|e| RoadEdge { a: inv[e.a], b: inv[e.b], length_m: e.length_m }).collect();
    let mut out = s.clone();
    out.road = RoadNetwork::new(nodes, edges).unwrap();
    out.tasks = task_perm.iter().enumerate().map(|(k, &o)| TaskPoint { index: k, ..s.tasks[o].clone() }).collect();
    out
}

fn inverse(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    perm.iter().enumerate().for_each(|(k, &o)| inv[o] = k);
    inv
}

fn relabel(a: Action, task_inv: &[usize], node_inv: &[usize]) -> Action {
    match a {
        Action::UavVisit { uav, task } => Action::UavVisit { uav, task: task_inv[task] },
        Action::UgvMove { ugv, node } => Action::UgvMove { ugv, node: node_inv[node] },
        r => r,
    }
}

fn causal_case(seed: u64) -> bool {
    let s = generate_scenario(&GenConfig::preset(3, 3).with_team(2, 1), seed).unwrap();
    let g = build_context_graph(&s, &Dynamics::new(&s).unwrap().initial_state(), &RadiusConfig::for_scenario(&s));
    let vocab = Vocab::for_scenario(&s);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = if seed % 2 == 0 { EncoderKind::Hgt } else { EncoderKind::Mlp };
    let m = Model::new(ModelConfig { d: 8, max_len: 16, seed, ..ModelConfig::new(kind, 2) }).unwrap();
    let t = rng.gen_range(1..8);
    let base: Vec<usize> = (0..t + rng.gen_range(0..5)).map(|_| rng.gen_range(0..vocab.start())).collect();
    let mut changed = base.clone();
    for tok in changed.iter_mut().skip(t - 1) {
        *tok = rng.gen_range(0..vocab.start());
    }
    let row = |prefix: &[usize]| {
        let mut f = m.forward();
        let h = f.encode(&g).unwrap();
        let table = f.action_table(h, &g, &vocab);
        let l = f.decoder(h, table, &vocab, prefix).unwrap();
        f.tape.value(l).row(t - 1).to_owned()
    };
    let reference = row(&base[..t - 1]);
    row(&base) == reference && row(&changed) == reference
}

/// Largest loss difference under a random typed relabeling, over both encoders and both
/// conditioning modes. The stepwise loss needs a feasible teacher, so the greedy policy supplies it.
fn relabel_case(seed: u64) -> f64 {
    let s = generate_scenario(&GenConfig::preset(4, 3).with_team(2, 1), seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut task_perm: Vec<usize> = (0..s.n_tasks()).collect();
    task_perm.shuffle(&mut rng);
    let mut node_perm: Vec<usize> = (0..s.n_nodes()).collect();
    node_perm.shuffle(&mut rng);
    let p = permute(&s, &task_perm, &node_perm);
    let (task_inv, node_inv) = (inverse(&task_perm), inverse(&node_perm));
    let dy = Dynamics::new(&s).unwrap();
    let (plan, _) = GreedyPolicy::new(&dy).complete(&dy.initial_state()).unwrap();
    let moved: Vec<Action> = plan.iter().map(|&a| relabel(a, &task_inv, &node_inv)).collect();
    let a = Example::new("a", &s, &JointPlan::new(plan.clone())).unwrap();
    let b = Example::new("b", &p, &JointPlan::new(moved)).unwrap();
    let mut worst = 0.0f64;
    for kind in [EncoderKind::Hgt, EncoderKind::Mlp] {
        for context in [DecodeMode::EncodeOnce, DecodeMode::ReencodeEachStep] {
            let m = Model::new(ModelConfig { d: 8, max_len: 2 * plan.len(), seed, context, ..ModelConfig::new(kind, 2) }).unwrap();
            let (fa, _, la) = a.loss(&m).unwrap();
            let (fb, _, lb) = b.loss(&m).unwrap();
            worst = worst.max((fa.tape.value(la)[[0, 0]] - fb.tape.value(lb)[[0, 0]]).abs());
        }
    }
    worst
}

fn a9() -> Outcome {
    let causal = (0..100).filter(|&s| causal_case(s)).count();
    let worst = (0..100).map(relabel_case).fold(0.0, f64::max);
    check(causal == 100 && worst <= 1e-9, format!("decoder mask invariance {causal}/100 cases; relabeling invariance max loss diff {worst:.1e} over 100 cases"))
}

fn main() -> ExitCode {
    let criteria: [(&str, &str, fn() -> Outcome); 9] = [
        ("A1", "energy model fidelity", a1),
        ("A2", "executor conservation and synchronization", a2),
        ("A3", "oracle exactness", a3),
        ("A4", "gradient correctness", a4),
        ("A5", "imitation overfit", a5),
        ("A6", "desk-scale generalization", a6),
        ("A7", "metaheuristic sanity", a7),
        ("A8", "end-to-end determinism", a8),
        ("A9", "causality and equivariance", a9),
    ];
    let wanted: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !wanted.is_empty() && !wanted.iter().any(|w| w == id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{id} {tag} {name} [{secs:.1} s]: {detail}");
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
