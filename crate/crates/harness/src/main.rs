use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use copcs_core::dynamics::execute_plan;
use copcs_core::metaheuristics::{self, MetaParams};
use copcs_core::oracle::{generate_dataset, load_split, solve_exact, Budget, DatasetConfig, Split};
use copcs_core::scenario::{generate_scenario, load_scenario, save_scenario, Area};
use copcs_core::{GenConfig, JointPlan, Scenario};
use copcs_harness::{export_trace_svg, resolve_out, run_benchmark, BenchMethod, BenchmarkConfig, HarnessError};
use copcs_neural::{load_model, loss_csv, masked_greedy_decode, DecodeMode, EncoderKind, Example, Model, ModelConfig, TrainConfig, Trainer};

/// Co-planning of UAV/UGV teams: instance generation, exact and heuristic solvers, imitation
/// training and benchmarking.
#[derive(Debug, Parser)]
#[command(name = "copcs", version)]
struct Cli {
    /// Seed for every random choice the subcommand makes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// TOML file with optional [generator], [dataset], [meta], [model], [train], [benchmark] and
    /// [oracle] tables. Command line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file or directory. Defaults to a subcommand-specific name under $COPCS_OUT_DIR.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate one scenario, or a dataset of oracle-solved instances with --dataset.
    Gen(GenArgs),
    /// Solve one instance exactly.
    Oracle(OracleArgs),
    /// Solve one instance with a metaheuristic or a trained model.
    Solve(SolveArgs),
    /// Train a model on the training split of a dataset.
    Train(TrainArgs),
    /// Benchmark methods on a dataset split.
    Eval(EvalArgs),
    /// Replay a plan and render it as SVG plus an event log.
    Trace(TraceArgs),
}

#[derive(Debug, Args)]
struct MissionArgs {
    /// Scenario file; excludes the generator flags.
    #[arg(long, conflicts_with_all = ["tasks", "paths", "uavs", "ugvs", "area"])]
    scenario: Option<PathBuf>,
    /// Number of task points.
    #[arg(long)]
    tasks: Option<usize>,
    /// Number of road nodes.
    #[arg(long)]
    paths: Option<usize>,
    /// Number of UAVs.
    #[arg(long)]
    uavs: Option<usize>,
    /// Number of UGVs.
    #[arg(long)]
    ugvs: Option<usize>,
    /// Area as WIDTHxHEIGHT in meters.
    #[arg(long, value_parser = parse_area)]
    area: Option<Area>,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(flatten)]
    mission: MissionArgs,
    /// Write a dataset directory of oracle demonstrations instead of a single scenario.
    #[arg(long)]
    dataset: bool,
    /// Instances in the dataset.
    #[arg(long)]
    instances: Option<usize>,
    /// Share of instances in the training split.
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Oracle node budget per instance.
    #[arg(long)]
    max_nodes: Option<usize>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    mission: MissionArgs,
    /// Search node budget.
    #[arg(long)]
    max_nodes: Option<usize>,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    max_seconds: Option<f64>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    mission: MissionArgs,
    /// gls, ts, sa, mlp or copcs.
    #[arg(long)]
    method: BenchMethod,
    /// Model checkpoint for mlp and copcs.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Iteration budget of the metaheuristics.
    #[arg(long)]
    iters: Option<usize>,
    /// encode-once or reencode-each-step; defaults to the mode the model was trained with.
    #[arg(long)]
    decode_mode: Option<DecodeMode>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Dataset directory written by `gen --dataset`.
    #[arg(long)]
    dataset: PathBuf,
    /// hgt or mlp.
    #[arg(long, value_parser = parse_encoder)]
    encoder: Option<EncoderKind>,
    /// Optimizer steps in total, counting resumed ones.
    #[arg(long)]
    steps: Option<usize>,
    /// Adam learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Demonstrations per step.
    #[arg(long)]
    batch: Option<usize>,
    /// Embedding width.
    #[arg(long)]
    d: Option<usize>,
    /// Longest plan the decoder can emit. Defaults to twice the longest demonstration.
    #[arg(long)]
    max_len: Option<usize>,
    /// Conditioning: encode-once or reencode-each-step.
    #[arg(long)]
    context: Option<DecodeMode>,
    /// Also train on the mirror images and rotations of every demonstration.
    #[arg(long)]
    augment: bool,
    /// Resume from a checkpoint written by an earlier run.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Dataset directory written by `gen --dataset`.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Comma separated subset of oracle, gls, ts, sa, mlp, copcs.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<BenchMethod>>,
    /// train or test.
    #[arg(long, value_parser = parse_split)]
    split: Option<Split>,
    /// Checkpoint of the graph-attention model.
    #[arg(long)]
    copcs_checkpoint: Option<PathBuf>,
    /// Checkpoint of the MLP-encoder model.
    #[arg(long)]
    mlp_checkpoint: Option<PathBuf>,
    /// Iteration budget of the metaheuristics.
    #[arg(long)]
    iters: Option<usize>,
    /// Oracle node budget per instance.
    #[arg(long)]
    max_nodes: Option<usize>,
    /// encode-once or reencode-each-step; defaults to each model's own mode.
    #[arg(long)]
    decode_mode: Option<DecodeMode>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct TraceArgs {
    #[command(flatten)]
    mission: MissionArgs,
    /// Plan file to replay. Without it the plan comes from --method.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Method that produces the plan when --plan is absent: gls, ts, sa, mlp or copcs.
    #[arg(long, default_value = "gls")]
    method: BenchMethod,
    /// Model checkpoint for mlp and copcs.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    generator: Option<GenConfig>,
    dataset: Option<DatasetConfig>,
    meta: Option<MetaParams>,
    /// Kept raw so `train` can tell whether `max_len` was given.
    model: Option<toml::Table>,
    train: Option<TrainConfig>,
    benchmark: Option<BenchmarkConfig>,
    oracle: Option<Budget>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| user(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| user(format!("config {}: {e}", path.display())))
    }
}

fn user(msg: impl Into<String>) -> anyhow::Error {
    HarnessError::Config(msg.into()).into()
}

fn parse_area(s: &str) -> Result<Area, String> {
    let (w, h) = s.split_once('x').ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok(Area { width_m: num(w)?, height_m: num(h)? })
}

fn parse_encoder(s: &str) -> Result<EncoderKind, String> {
    match s {
        "hgt" => Ok(EncoderKind::Hgt),
        "mlp" => Ok(EncoderKind::Mlp),
        _ => Err(format!("unknown encoder {s:?}")),
    }
}

fn parse_split(s: &str) -> Result<Split, String> {
    match s {
        "train" => Ok(Split::Train),
        "test" => Ok(Split::Test),
        _ => Err(format!("unknown split {s:?}")),
    }
}

impl MissionArgs {
    fn generator(&self, base: GenConfig) -> GenConfig {
        let mut g = base;
        if let Some(t) = self.tasks {
            g.n_tasks = t;
        }
        if let Some(p) = self.paths {
            g.n_road_nodes = p;
        }
        if let Some(u) = self.uavs {
            g.fleet.n_uav = u;
        }
        if let Some(u) = self.ugvs {
            g.fleet.n_ugv = u;
        }
        if let Some(a) = self.area {
            g.area = a;
        }
        g
    }

    fn scenario(&self, file: &FileConfig, seed: u64) -> anyhow::Result<Scenario> {
        match &self.scenario {
            Some(path) => Ok(load_scenario(path).map_err(|e| user(format!("scenario {}: {e}", path.display())))?),
            None => Ok(generate_scenario(&self.generator(file.generator.clone().unwrap_or_default()), seed).map_err(HarnessError::from)?),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(h) = cause.downcast_ref::<HarnessError>() {
            return if h.is_user_error() { 1 } else { 2 };
        }
    }
    2
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let out = cli.out.as_deref();
    match cli.command {
        Command::Gen(a) => gen(a, &file, cli.seed, out),
        Command::Oracle(a) => oracle(a, &file, cli.seed, out),
        Command::Solve(a) => solve(a, &file, cli.seed, out),
        Command::Train(a) => train(a, &file, cli.seed, out),
        Command::Eval(a) => eval(a, &file, cli.seed, out),
        Command::Trace(a) => trace(a, &file, cli.seed, out),
    }
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).map_err(HarnessError::from).with_context(|| format!("creating {}", dir.display()))
}

fn gen(a: GenArgs, file: &FileConfig, seed: u64, out: Option<&Path>) -> anyhow::Result<()> {
    if a.mission.scenario.is_some() {
        bail!(user("gen builds scenarios; --scenario is not accepted"));
    }
    if a.dataset {
        let mut cfg = file.dataset.clone().unwrap_or_default();
        cfg.generator = a.mission.generator(file.generator.clone().unwrap_or(cfg.generator));
        if let Some(n) = a.instances {
            cfg.n_instances = n;
        }
        if let Some(f) = a.train_fraction {
            cfg.train_fraction = f;
        }
        if let Some(n) = a.max_nodes {
            cfg.budget.max_nodes = n;
        }
        cfg.base_seed = seed;
        let dir = resolve_out(out, "dataset");
        create_dir(&dir)?;
        let summary = generate_dataset(&cfg, &dir).map_err(HarnessError::from)?;
        println!("wrote {} train and {} test instances to {}", summary.n_train, summary.n_test, dir.display());
    } else {
        let g = a.mission.generator(file.generator.clone().unwrap_or_default());
        let scenario = generate_scenario(&g, seed).map_err(HarnessError::from)?;
        let path = resolve_out(out, &format!("{}-seed{seed}.toml", g.label()));
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            create_dir(parent)?;
        }
        save_scenario(&scenario, &path).map_err(HarnessError::from)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn report_plan(scenario: &Scenario, plan: &JointPlan, dir: &Path, name: &str) -> anyhow::Result<()> {
    let metrics = execute_plan(scenario, plan).map_err(|e| HarnessError::Internal(format!("{name} produced an invalid plan: {e}")))?.metrics();
    std::fs::write(dir.join(format!("{name}.plan")), plan.to_lines()).map_err(HarnessError::from)?;
    println!(
        "{name}: makespan {:.1} s, UAV energy {:.1} kJ, UGV energy {:.1} kJ, {} actions",
        metrics.makespan_s,
        metrics.uav_energy_kj,
        metrics.ugv_energy_kj,
        plan.len()
    );
    Ok(())
}

fn oracle(a: OracleArgs, file: &FileConfig, seed: u64, out: Option<&Path>) -> anyhow::Result<()> {
    let scenario = a.mission.scenario(file, seed)?;
    let mut budget = file.oracle.unwrap_or_default();
    if let Some(n) = a.max_nodes {
        budget.max_nodes = n;
    }
    if a.max_seconds.is_some() {
        budget.max_seconds = a.max_seconds;
    }
    let sol = solve_exact(&scenario, budget).map_err(HarnessError::from)?;
    let dir = resolve_out(out, "oracle");
    create_dir(&dir)?;
    println!("status {}, {} nodes expanded", sol.status, sol.expanded);
    report_plan(&scenario, &sol.plan, &dir, "oracle")
}

fn load_checkpoint(path: Option<&Path>, method: BenchMethod) -> anyhow::Result<Model> {
    let path = path.ok_or_else(|| user(format!("method {method} needs --checkpoint")))?;
    if !path.exists() {
        bail!(user(format!("checkpoint {} does not exist", path.display())));
    }
    Ok(load_model(path).map_err(HarnessError::from)?)
}

fn plan_with(scenario: &Scenario, method: BenchMethod, meta: &MetaParams, checkpoint: Option<&Path>, mode: Option<DecodeMode>) -> anyhow::Result<(JointPlan, Option<String>)> {
    let heuristic = |m| -> anyhow::Result<(JointPlan, Option<String>)> {
        let r = metaheuristics::solve(scenario, m, meta).map_err(HarnessError::from)?;
        let log = r.log_csv();
        Ok((r.plan, Some(log)))
    };
    match method {
        BenchMethod::Oracle => bail!(user("use the oracle subcommand for exact solving")),
        BenchMethod::Gls => heuristic(metaheuristics::Method::Gls),
        BenchMethod::Ts => heuristic(metaheuristics::Method::Ts),
        BenchMethod::Sa => heuristic(metaheuristics::Method::Sa),
        BenchMethod::Mlp | BenchMethod::Copcs => {
            let model = load_checkpoint(checkpoint, method)?;
            Ok((masked_greedy_decode(scenario, &model, mode.unwrap_or(model.config.context)).map_err(HarnessError::from)?, None))
        }
    }
}

fn solve(a: SolveArgs, file: &FileConfig, seed: u64, out: Option<&Path>) -> anyhow::Result<()> {
    let scenario = a.mission.scenario(file, seed)?;
    let mut meta = file.meta.unwrap_or_default();
    meta.seed = seed;
    if let Some(n) = a.iters {
        meta.max_iters = n;
    }
    let (plan, log) = plan_with(&scenario, a.method, &meta, a.checkpoint.as_deref(), a.decode_mode)?;
    let dir = resolve_out(out, "solve");
    create_dir(&dir)?;
    if let Some(log) = log {
        std::fs::write(dir.join(format!("{}_log.csv", a.method)), log).map_err(HarnessError::from)?;
    }
    report_plan(&scenario, &plan, &dir, a.method.name())
}

fn train(a: TrainArgs, file: &FileConfig, seed: u64, out: Option<&Path>) -> anyhow::Result<()> {
    if !a.dataset.is_dir() {
        bail!(user(format!("dataset directory {} does not exist", a.dataset.display())));
    }
    let demos = load_split(&a.dataset, Split::Train).map_err(HarnessError::from)?;
    if demos.is_empty() {
        bail!(user("the training split is empty"));
    }
    let n_uav = demos[0].scenario.fleet.n_uav;
    if demos.iter().any(|d| d.scenario.fleet.n_uav != n_uav) {
        bail!(user("training demonstrations mix team sizes"));
    }
    let longest = demos.iter().map(|d| d.plan.len()).max().unwrap_or(1);

    let mut trainer = match &a.resume {
        Some(path) => {
            let mut t = Trainer::load(path).map_err(HarnessError::from)?;
            if let Some(s) = a.steps {
                t.config.steps = s;
            }
            t
        }
        None => {
            let table = file.model.clone().unwrap_or_default();
            let explicit_len = table.contains_key("max_len");
            let mut mc: ModelConfig = table.try_into().map_err(|e| user(format!("[model]: {e}")))?;
            mc.n_uav = n_uav;
            mc.seed = seed;
            if let Some(enc) = a.encoder {
                mc.encoder = enc;
            }
            if let Some(d) = a.d {
                mc.d = d;
            }
            if let Some(c) = a.context {
                mc.context = c;
            }
            mc.max_len = match a.max_len {
                Some(n) => n,
                None if explicit_len => mc.max_len,
                None => 2 * longest,
            };
            let mut tc = file.train.unwrap_or_default();
            tc.seed = seed;
            if let Some(s) = a.steps {
                tc.steps = s;
            }
            if let Some(lr) = a.lr {
                tc.lr = lr;
            }
            if let Some(b) = a.batch {
                tc.batch = b;
            }
            tc.augment |= a.augment;
            Trainer::new(Model::new(mc).map_err(HarnessError::from)?, tc).map_err(HarnessError::from)?
        }
    };
    if trainer.model.config.max_len < longest {
        bail!(user(format!("max_len {} is shorter than the longest demonstration ({longest})", trainer.model.config.max_len)));
    }

    let examples = Example::for_training(&demos, &trainer.config).map_err(HarnessError::from)?;
    let dir = resolve_out(out, "train");
    create_dir(&dir)?;
    let records = trainer.run(&examples).map_err(HarnessError::from)?;
    trainer.save(dir.join("checkpoint.json")).map_err(HarnessError::from)?;
    std::fs::write(dir.join("loss.csv"), loss_csv(&records)).map_err(HarnessError::from)?;
    if let Some(last) = records.last() {
        println!("step {}: loss {:.4}, token accuracy {:.3}", last.step, last.loss, last.accuracy);
    }
    println!("wrote {}", dir.join("checkpoint.json").display());
    Ok(())
}

fn eval(a: EvalArgs, file: &FileConfig, seed: u64, out: Option<&Path>) -> anyhow::Result<()> {
    let mut cfg = file.benchmark.clone().unwrap_or_default();
    if let Some(meta) = file.meta {
        cfg.meta = meta;
    }
    if let Some(b) = file.oracle {
        cfg.oracle_budget = b;
    }
    cfg.meta.seed = seed;
    if let Some(d) = a.dataset {
        cfg.dataset = d;
    }
    if let Some(m) = a.methods {
        cfg.methods = m;
    }
    if let Some(s) = a.split {
        cfg.split = s;
    }
    if a.copcs_checkpoint.is_some() {
        cfg.copcs_checkpoint = a.copcs_checkpoint;
    }
    if a.mlp_checkpoint.is_some() {
        cfg.mlp_checkpoint = a.mlp_checkpoint;
    }
    if let Some(n) = a.iters {
        cfg.meta.max_iters = n;
    }
    if let Some(n) = a.max_nodes {
        cfg.oracle_budget.max_nodes = n;
    }
    if a.decode_mode.is_some() {
        cfg.decode_mode = a.decode_mode;
    }
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    if out.is_some() || file.benchmark.is_none() {
        cfg.out_dir = resolve_out(out, "eval");
    }
    let report = run_benchmark(&cfg)?;
    println!("{:<14} {:<7} {:>4} {:>9} {:>12} {:>10} {:>10} {:>10}", "mission", "method", "n", "feasible", "makespan_s", "std", "uav_kJ", "wall_s");
    for row in &report.summary {
        println!(
            "{:<14} {:<7} {:>4} {:>9.3} {:>12.1} {:>10.1} {:>10.1} {:>10.3}",
            row.mission,
            row.method,
            row.n,
            row.feasible_rate,
            row.makespan_mean,
            row.makespan_std,
            row.uav_kj_mean,
            report.mean_wall_s(row.method)
        );
    }
    println!("wrote {}", cfg.out_dir.display());
    Ok(())
}

fn trace(a: TraceArgs, file: &FileConfig, seed: u64, out: Option<&Path>) -> anyhow::Result<()> {
    let scenario = a.mission.scenario(file, seed)?;
    let plan = match &a.plan {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| user(format!("cannot read plan {}: {e}", path.display())))?;
            JointPlan::from_lines(&text).map_err(|e| user(format!("plan {}: {e}", path.display())))?
        }
        None => {
            let mut meta = file.meta.unwrap_or_default();
            meta.seed = seed;
            plan_with(&scenario, a.method, &meta, a.checkpoint.as_deref(), None)?.0
        }
    };
    let trace = execute_plan(&scenario, &plan).map_err(|e| user(format!("plan does not execute: {e}")))?;
    let dir = resolve_out(out, "trace");
    create_dir(&dir)?;
    export_trace_svg(&scenario, Some(&trace), dir.join("trace.svg")).map_err(HarnessError::from)?;
    std::fs::write(dir.join("events.log"), trace.to_event_log()).map_err(HarnessError::from)?;
    let m = trace.metrics();
    println!("makespan {:.1} s, {} events, {} recharges", m.makespan_s, trace.events.len(), trace.rendezvous.len());
    println!("wrote {}", dir.display());
    Ok(())
}
