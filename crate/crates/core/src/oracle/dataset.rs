use std::fmt;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::search::{solve_exact, Budget, SolveStatus};
use crate::dynamics::{execute_plan, JointPlan};
use crate::error::{Error, Result};
use crate::scenario::{generate_scenario, load_scenario, save_scenario, GenConfig, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub generator: GenConfig,
    pub n_instances: usize,
    /// Share of instances, taken by index from the front, that form the training split.
    pub train_fraction: f64,
    pub base_seed: u64,
    pub budget: Budget,
    /// Seeds tried per instance before giving up.
    pub max_attempts: usize,
    /// Abort once more than this share of instances hit the node budget.
    pub max_exhausted_fraction: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            generator: GenConfig::preset(6, 3),
            n_instances: 1000,
            train_fraction: 0.8,
            base_seed: 0,
            budget: Budget { max_nodes: 500_000, max_seconds: None },
            max_attempts: 20,
            max_exhausted_fraction: 0.2,
        }
    }
}

impl DatasetConfig {
    pub fn n_train(&self) -> usize {
        ((self.n_instances as f64 * self.train_fraction).round() as usize).min(self.n_instances)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// An optimal joint plan for one scenario; its actions are the teacher tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    pub id: String,
    pub split: Split,
    pub seed: u64,
    /// Seed first assigned to this slot; differs from `seed` when the instance was regenerated.
    pub original_seed: u64,
    pub scenario: Scenario,
    pub plan: JointPlan,
    pub makespan_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetSummary {
    pub n_train: usize,
    pub n_test: usize,
    /// Solver runs that ran out of budget, over all attempts.
    pub exhausted: usize,
    /// One line per substituted seed.
    pub regenerated: Vec<String>,
}

/// Seed for instance `index` on its `attempt`-th try. The first try uses `base + index`.
pub fn instance_seed(base: u64, index: usize, attempt: usize) -> u64 {
    if attempt == 0 {
        return base.wrapping_add(index as u64);
    }
    // splitmix64 finalizer over the triple
    let mut z = base ^ (index as u64).rotate_left(32) ^ (attempt as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct Solved {
    demo: Option<Demonstration>,
    exhausted: usize,
    log: Vec<String>,
}

fn solve_slot(config: &DatasetConfig, index: usize) -> Result<Solved> {
    let split = if index < config.n_train() { Split::Train } else { Split::Test };
    let original_seed = instance_seed(config.base_seed, index, 0);
    let mut exhausted = 0;
    let mut log = Vec::new();
    for attempt in 0..config.max_attempts.max(1) {
        let seed = instance_seed(config.base_seed, index, attempt);
        let scenario = generate_scenario(&config.generator, seed)?;
        let reason = match solve_exact(&scenario, config.budget) {
            Ok(sol) if sol.status == SolveStatus::Optimal => {
                let id = format!("{split}-{index:04}");
                let demo =
                    Demonstration { id, split, seed, original_seed, scenario, plan: sol.plan, makespan_s: sol.makespan_s };
                return Ok(Solved { demo: Some(demo), exhausted, log });
            }
            Ok(_) | Err(Error::BudgetExhausted) => {
                exhausted += 1;
                "node budget exhausted"
            }
            Err(Error::NoFeasiblePlan(_)) => "no feasible plan",
            Err(e) => return Err(e),
        };
        let next = instance_seed(config.base_seed, index, attempt + 1);
        log.push(format!("instance {index}: seed {seed} replaced by seed {next} ({reason}); original seed {original_seed}"));
    }
    Ok(Solved { demo: None, exhausted, log })
}

/// Solves every instance slot, regenerating the ones the oracle cannot certify.
pub fn build_demonstrations(config: &DatasetConfig) -> Result<(Vec<Demonstration>, DatasetSummary)> {
    let results: Vec<Result<Solved>> = (0..config.n_instances).into_par_iter().map(|i| solve_slot(config, i)).collect();
    let mut demos = Vec::with_capacity(config.n_instances);
    let mut summary = DatasetSummary::default();
    let mut missing = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        let solved = r?;
        summary.exhausted += solved.exhausted;
        summary.regenerated.extend(solved.log);
        match solved.demo {
            Some(d) => demos.push(d),
            None => missing.push(i),
        }
    }
    if summary.exhausted as f64 > config.max_exhausted_fraction * config.n_instances as f64 {
        return Err(Error::TooManyExhausted { exhausted: summary.exhausted, total: config.n_instances });
    }
    if !missing.is_empty() {
        return Err(Error::Config(format!("instances {missing:?} found no certified plan in {} attempts", config.max_attempts)));
    }
    summary.n_train = demos.iter().filter(|d| d.split == Split::Train).count();
    summary.n_test = demos.len() - summary.n_train;
    Ok((demos, summary))
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestRow {
    id: String,
    split: Split,
    seed: u64,
    original_seed: u64,
    makespan_s: f64,
    status: String,
}

/// Writes `<out>/{train,test}/<id>.toml` scenarios with matching `.plan` token files, plus
/// `manifest.csv`, `regenerated.log` and the generating `dataset.toml`.
pub fn generate_dataset(config: &DatasetConfig, out: &Path) -> Result<DatasetSummary> {
    let (demos, summary) = build_demonstrations(config)?;
    for split in [Split::Train, Split::Test] {
        fs::create_dir_all(out.join(split.to_string()))?;
    }
    let mut manifest = csv::Writer::from_path(out.join("manifest.csv"))?;
    for d in &demos {
        let dir = out.join(d.split.to_string());
        save_scenario(&d.scenario, dir.join(format!("{}.toml", d.id)))?;
        fs::write(dir.join(format!("{}.plan", d.id)), d.plan.to_lines())?;
        manifest.serialize(ManifestRow {
            id: d.id.clone(),
            split: d.split,
            seed: d.seed,
            original_seed: d.original_seed,
            makespan_s: d.makespan_s,
            status: SolveStatus::Optimal.to_string(),
        })?;
    }
    manifest.flush()?;
    let mut log = summary.regenerated.join("\n");
    if !log.is_empty() {
        log.push('\n');
    }
    fs::write(out.join("regenerated.log"), log)?;
    let header = "# Demonstrations are solved on this reduced configuration because exact solving does not scale to large missions.\n";
    let body = toml::to_string(config).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(out.join("dataset.toml"), format!("{header}{body}"))?;
    Ok(summary)
}

/// Loads one split of a dataset written by [`generate_dataset`], in manifest order.
pub fn load_split(dir: &Path, split: Split) -> Result<Vec<Demonstration>> {
    let mut reader = csv::Reader::from_path(dir.join("manifest.csv"))?;
    let mut out = Vec::new();
    for row in reader.deserialize() {
        let row: ManifestRow = row?;
        if row.split != split {
            continue;
        }
        let sub = dir.join(split.to_string());
        let scenario = load_scenario(sub.join(format!("{}.toml", row.id)))?;
        let plan_path = sub.join(format!("{}.plan", row.id));
        let text = fs::read_to_string(&plan_path)?;
        let plan = JointPlan::from_lines(&text).map_err(|message| Error::Parse { path: plan_path.display().to_string(), message })?;
        out.push(Demonstration {
            id: row.id,
            split,
            seed: row.seed,
            original_seed: row.original_seed,
            scenario,
            plan,
            makespan_s: row.makespan_s,
        });
    }
    Ok(out)
}

impl Demonstration {
    /// Replays the plan and checks it reproduces the recorded makespan exactly.
    pub fn verify(&self) -> Result<()> {
        let ms = execute_plan(&self.scenario, &self.plan)?.metrics().makespan_s;
        if ms.to_bits() != self.makespan_s.to_bits() {
            return Err(Error::Validation(format!("{}: replayed makespan {ms} differs from recorded {}", self.id, self.makespan_s)));
        }
        Ok(())
    }
}
