use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use copcs_core::dynamics::execute_plan;
use copcs_core::metaheuristics::{self, MetaParams};
use copcs_core::oracle::{load_split, solve_exact, Budget, Demonstration, SolveStatus, Split};
use copcs_core::{JointPlan, Scenario};
use copcs_neural::{load_model, masked_greedy_decode, DecodeMode, Model, NeuralError};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchMethod {
    Oracle,
    Gls,
    Ts,
    Sa,
    Mlp,
    Copcs,
}

impl BenchMethod {
    pub const ALL: [BenchMethod; 6] = [Self::Oracle, Self::Gls, Self::Ts, Self::Sa, Self::Mlp, Self::Copcs];

    pub fn name(self) -> &'static str {
        match self {
            Self::Oracle => "oracle",
            Self::Gls => "gls",
            Self::Ts => "ts",
            Self::Sa => "sa",
            Self::Mlp => "mlp",
            Self::Copcs => "copcs",
        }
    }
}

impl std::fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.name())
    }
}

impl std::str::FromStr for BenchMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| format!("unknown method {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub dataset: PathBuf,
    pub split: Split,
    pub methods: Vec<BenchMethod>,
    pub meta: MetaParams,
    pub oracle_budget: Budget,
    pub copcs_checkpoint: Option<PathBuf>,
    pub mlp_checkpoint: Option<PathBuf>,
    /// Decoding mode for the learned methods; each model's own conditioning mode when unset.
    pub decode_mode: Option<DecodeMode>,
    pub out_dir: PathBuf,
    /// Instances solved concurrently; 0 uses every core.
    pub workers: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("dataset"),
            split: Split::Test,
            methods: vec![BenchMethod::Oracle, BenchMethod::Gls, BenchMethod::Ts, BenchMethod::Sa],
            meta: MetaParams::default(),
            oracle_budget: Budget::default(),
            copcs_checkpoint: None,
            mlp_checkpoint: None,
            decode_mode: None,
            out_dir: PathBuf::from("bench"),
            workers: 0,
        }
    }
}

/// Outcome of one method on one instance. Metrics are present only for plans that passed
/// `execute_plan`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub instance: String,
    pub mission: String,
    pub method: BenchMethod,
    /// `optimal`, `feasible`, `budget_exhausted`, `no_feasible_plan`, `dead_end` or `invalid_plan`.
    pub status: String,
    pub makespan_s: Option<f64>,
    pub uav_energy_kj: Option<f64>,
    pub ugv_energy_kj: Option<f64>,
    pub plan_len: usize,
}

impl InstanceRecord {
    pub fn feasible(&self) -> bool {
        self.makespan_s.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub instance: String,
    pub method: BenchMethod,
    /// Hardware dependent.
    pub wall_s: f64,
}

/// One `(mission, method)` cell: feasibility rate and mean / population standard deviation of the
/// metrics over feasible instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub mission: String,
    pub method: BenchMethod,
    pub n: usize,
    pub feasible_rate: f64,
    pub makespan_mean: f64,
    pub makespan_std: f64,
    pub uav_kj_mean: f64,
    pub uav_kj_std: f64,
    pub ugv_kj_mean: f64,
    pub ugv_kj_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub records: Vec<InstanceRecord>,
    pub timings: Vec<TimingRecord>,
    pub summary: Vec<SummaryRow>,
    /// Plans in record order, `None` where no plan was produced.
    pub plans: Vec<Option<JointPlan>>,
}

impl BenchmarkReport {
    /// Mean wall-clock seconds per instance for `method`; hardware dependent.
    pub fn mean_wall_s(&self, method: BenchMethod) -> f64 {
        let xs: Vec<f64> = self.timings.iter().filter(|t| t.method == method).map(|t| t.wall_s).collect();
        xs.iter().sum::<f64>() / xs.len().max(1) as f64
    }
}

pub fn mission_label(s: &Scenario) -> String {
    format!("T{}-P{}-U{}G{}", s.n_tasks(), s.n_nodes(), s.fleet.n_uav, s.fleet.n_ugv)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Aggregates records by `(mission, method)` in first-seen mission order and method order.
pub fn summarize(records: &[InstanceRecord]) -> Vec<SummaryRow> {
    let mut missions: Vec<&str> = Vec::new();
    for r in records {
        if !missions.contains(&r.mission.as_str()) {
            missions.push(&r.mission);
        }
    }
    let mut out = Vec::new();
    for mission in missions {
        for method in BenchMethod::ALL {
            let cell: Vec<&InstanceRecord> = records.iter().filter(|r| r.mission == mission && r.method == method).collect();
            if cell.is_empty() {
                continue;
            }
            let ok: Vec<&&InstanceRecord> = cell.iter().filter(|r| r.feasible()).collect();
            let col = |f: fn(&InstanceRecord) -> Option<f64>| mean_std(&ok.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
            let (makespan_mean, makespan_std) = col(|r| r.makespan_s);
            let (uav_kj_mean, uav_kj_std) = col(|r| r.uav_energy_kj);
            let (ugv_kj_mean, ugv_kj_std) = col(|r| r.ugv_energy_kj);
            out.push(SummaryRow {
                mission: mission.to_string(),
                method,
                n: cell.len(),
                feasible_rate: ok.len() as f64 / cell.len() as f64,
                makespan_mean,
                makespan_std,
                uav_kj_mean,
                uav_kj_std,
                ugv_kj_mean,
                ugv_kj_std,
            });
        }
    }
    out
}

struct Models {
    copcs: Option<Model>,
    mlp: Option<Model>,
}

fn load_models(config: &BenchmarkConfig) -> Result<Models> {
    let load = |method: BenchMethod, path: &Option<PathBuf>| -> Result<Option<Model>> {
        if !config.methods.contains(&method) {
            return Ok(None);
        }
        let path = path.as_ref().ok_or_else(|| HarnessError::Config(format!("method {method} needs a checkpoint")))?;
        if !path.exists() {
            return Err(HarnessError::Config(format!("checkpoint {} does not exist", path.display())));
        }
        Ok(Some(load_model(path)?))
    };
    Ok(Models { copcs: load(BenchMethod::Copcs, &config.copcs_checkpoint)?, mlp: load(BenchMethod::Mlp, &config.mlp_checkpoint)? })
}

/// Runs one method and validates its plan by re-execution.
pub fn run_method(
    scenario: &Scenario,
    method: BenchMethod,
    meta: &MetaParams,
    budget: Budget,
    model: Option<&Model>,
    mode: Option<DecodeMode>,
) -> Result<(String, Option<JointPlan>)> {
    let produced: std::result::Result<(String, JointPlan), String> = match method {
        BenchMethod::Oracle => match solve_exact(scenario, budget) {
            Ok(sol) => Ok((if sol.status == SolveStatus::Optimal { "optimal" } else { "budget_exhausted" }.to_string(), sol.plan)),
            Err(copcs_core::Error::NoFeasiblePlan(_)) => Err("no_feasible_plan".into()),
            Err(copcs_core::Error::BudgetExhausted) => Err("budget_exhausted".into()),
            Err(e) => return Err(e.into()),
        },
        BenchMethod::Gls | BenchMethod::Ts | BenchMethod::Sa => {
            let m = match method {
                BenchMethod::Gls => metaheuristics::Method::Gls,
                BenchMethod::Ts => metaheuristics::Method::Ts,
                _ => metaheuristics::Method::Sa,
            };
            match metaheuristics::solve(scenario, m, meta) {
                Ok(r) => Ok(("feasible".into(), r.plan)),
                Err(copcs_core::Error::NoFeasiblePlan(_)) => Err("no_feasible_plan".into()),
                Err(e) => return Err(e.into()),
            }
        }
        BenchMethod::Mlp | BenchMethod::Copcs => {
            let model = model.ok_or_else(|| HarnessError::Config(format!("method {method} needs a checkpoint")))?;
            match masked_greedy_decode(scenario, model, mode.unwrap_or(model.config.context)) {
                Ok(plan) => Ok(("feasible".into(), plan)),
                Err(NeuralError::DeadEnd { .. }) => Err("dead_end".into()),
                Err(e) => return Err(e.into()),
            }
        }
    };
    Ok(match produced {
        Ok((status, plan)) => (status, Some(plan)),
        Err(status) => (status, None),
    })
}

fn run_instance(demo: &Demonstration, config: &BenchmarkConfig, models: &Models) -> Result<Vec<(InstanceRecord, TimingRecord, Option<JointPlan>)>> {
    let mut out = Vec::new();
    for &method in &config.methods {
        let model = match method {
            BenchMethod::Copcs => models.copcs.as_ref(),
            BenchMethod::Mlp => models.mlp.as_ref(),
            _ => None,
        };
        let start = Instant::now();
        let (mut status, plan) = run_method(&demo.scenario, method, &config.meta, config.oracle_budget, model, config.decode_mode)?;
        let wall_s = start.elapsed().as_secs_f64();
        let metrics = match &plan {
            Some(p) => match execute_plan(&demo.scenario, p) {
                Ok(trace) => Some(trace.metrics()),
                Err(_) => {
                    status = "invalid_plan".into();
                    None
                }
            },
            None => None,
        };
        let record = InstanceRecord {
            instance: demo.id.clone(),
            mission: mission_label(&demo.scenario),
            method,
            status,
            makespan_s: metrics.map(|m| m.makespan_s),
            uav_energy_kj: metrics.map(|m| m.uav_energy_kj),
            ugv_energy_kj: metrics.map(|m| m.ugv_energy_kj),
            plan_len: plan.as_ref().map_or(0, |p| p.len()),
        };
        out.push((record, TimingRecord { instance: demo.id.clone(), method, wall_s }, plan));
    }
    Ok(out)
}

/// Runs every configured method on every instance of the split. Instances fan out over a pool of
/// `workers` threads; results are merged in instance order.
pub fn run_benchmark_on(demos: &[Demonstration], config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    if config.methods.is_empty() {
        return Err(HarnessError::Config("no methods selected".into()));
    }
    let models = load_models(config)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(config.workers).build().map_err(|e| HarnessError::Internal(e.to_string()))?;
    let per_instance: Vec<Result<_>> = pool.install(|| demos.par_iter().map(|d| run_instance(d, config, &models)).collect());
    let mut report = BenchmarkReport { records: Vec::new(), timings: Vec::new(), summary: Vec::new(), plans: Vec::new() };
    for rows in per_instance {
        for (r, t, p) in rows? {
            report.records.push(r);
            report.timings.push(t);
            report.plans.push(p);
        }
    }
    report.summary = summarize(&report.records);
    Ok(report)
}

/// Loads the split, runs it and writes `results.csv`, `summary.csv`, `timings.csv` and one plan
/// file per `(method, instance)` under `out_dir/plans`.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    if !config.dataset.is_dir() {
        return Err(HarnessError::Config(format!("dataset directory {} does not exist", config.dataset.display())));
    }
    let demos = load_split(&config.dataset, config.split)?;
    let report = run_benchmark_on(&demos, config)?;
    write_report(&report, &config.out_dir)?;
    Ok(report)
}

pub fn write_report(report: &BenchmarkReport, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    write_csv(&out_dir.join("results.csv"), &report.records)?;
    write_csv(&out_dir.join("summary.csv"), &report.summary)?;
    write_csv(&out_dir.join("timings.csv"), &report.timings)?;
    for (r, p) in report.records.iter().zip(&report.plans) {
        if let Some(p) = p {
            let dir = out_dir.join("plans").join(r.method.name());
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join(format!("{}.plan", r.instance)), p.to_lines())?;
        }
    }
    Ok(())
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<InstanceRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}
