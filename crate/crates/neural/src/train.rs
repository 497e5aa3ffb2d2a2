use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use copcs_core::oracle::Demonstration;
use copcs_core::scenario::{build_context_graph, ContextGraph, RadiusConfig, RoadNetwork};
use copcs_core::{JointPlan, Point, Scenario};

use crate::decode::DecodeMode;
use crate::error::{NeuralError, Result};
use crate::model::{Model, ModelConfig};
use crate::params::{AdamConfig, AdamState, ParamStore};
use crate::vocab::Vocab;

/// One teacher sequence with the context graph of the state before each of its tokens.
#[derive(Debug, Clone)]
pub struct Example {
    pub id: String,
    pub graphs: Vec<ContextGraph>,
    pub vocab: Vocab,
    pub tokens: Vec<usize>,
}

impl Example {
    pub fn new(id: &str, scenario: &Scenario, plan: &JointPlan) -> Result<Self> {
        let dynamics = copcs_core::dynamics::Dynamics::new(scenario)?;
        let radii = RadiusConfig::for_scenario(scenario);
        let mut state = dynamics.initial_state();
        let mut graphs = Vec::with_capacity(plan.len());
        for (step, &a) in plan.actions.iter().enumerate() {
            graphs.push(build_context_graph(scenario, &state, &radii));
            dynamics
                .apply(&mut state, a, None)
                .map_err(|reason| NeuralError::Core(copcs_core::Error::InfeasiblePlan { step, reason }))?;
        }
        let vocab = Vocab::for_scenario(scenario);
        let tokens = plan
            .actions
            .iter()
            .map(|&a| vocab.encode(a).ok_or_else(|| NeuralError::Config(format!("action {a} of {id} is outside the vocabulary"))))
            .collect::<Result<Vec<_>>>()?;
        if tokens.is_empty() {
            return Err(NeuralError::Config(format!("demonstration {id} is empty")));
        }
        Ok(Self { id: id.to_string(), graphs, vocab, tokens })
    }

    /// Context graph of the initial state.
    pub fn graph(&self) -> &ContextGraph {
        &self.graphs[0]
    }

    /// Teacher-forced forward pass under `model`'s conditioning mode.
    pub fn loss<'m>(&self, model: &'m Model) -> Result<(crate::model::Forward<'m>, crate::tape::Var, crate::tape::Var)> {
        match model.config.context {
            DecodeMode::EncodeOnce => model.loss(self.graph(), &self.vocab, &self.tokens),
            DecodeMode::ReencodeEachStep => model.loss_stepwise(&self.graphs, &self.vocab, &self.tokens),
        }
    }

    /// Examples for `config`: augmented or not.
    pub fn for_training(demos: &[Demonstration], config: &TrainConfig) -> Result<Vec<Self>> {
        if config.augment {
            Self::augmented(demos)
        } else {
            Self::from_demonstrations(demos)
        }
    }

    pub fn from_demonstrations(demos: &[Demonstration]) -> Result<Vec<Self>> {
        demos.iter().map(|d| Self::new(&d.id, &d.scenario, &d.plan)).collect()
    }

    /// The demonstration on every mirror image and rotation of its map. Copies whose plan no
    /// longer executes after rounding are dropped; the original is always first.
    pub fn with_symmetries(id: &str, scenario: &Scenario, plan: &JointPlan) -> Result<Vec<Self>> {
        let mut out = vec![Self::new(id, scenario, plan)?];
        for (k, copy) in symmetric_copies(scenario).iter().enumerate().skip(1) {
            if let Ok(ex) = Self::new(&format!("{id}~{k}"), copy, plan) {
                out.push(ex);
            }
        }
        Ok(out)
    }

    /// [`Example::with_symmetries`] of every demonstration, flattened.
    pub fn augmented(demos: &[Demonstration]) -> Result<Vec<Self>> {
        let mut out = Vec::new();
        for d in demos {
            out.extend(Self::with_symmetries(&d.id, &d.scenario, &d.plan)?);
        }
        Ok(out)
    }
}

/// Distance-preserving images of the map: the eight symmetries of the square when the area is
/// square, else the four of the rectangle. Index 0 is the identity. Road edge lengths carry over.
pub fn symmetric_copies(scenario: &Scenario) -> Vec<Scenario> {
    let (w, h) = (scenario.area.width_m, scenario.area.height_m);
    let maps: Vec<fn(Point, f64, f64) -> Point> = vec![
        |p, _, _| p,
        |p, w, _| Point::new(w - p.x, p.y),
        |p, _, h| Point::new(p.x, h - p.y),
        |p, w, h| Point::new(w - p.x, h - p.y),
        |p, _, _| Point::new(p.y, p.x),
        |p, w, h| Point::new(w - p.y, h - p.x),
        |p, w, _| Point::new(w - p.y, p.x),
        |p, _, h| Point::new(p.y, h - p.x),
    ];
    let n = if w == h { 8 } else { 4 };
    maps[..n]
        .iter()
        .filter_map(|f| {
            let mut s = scenario.clone();
            s.depot = f(s.depot, w, h);
            for t in &mut s.tasks {
                t.position = f(t.position, w, h);
            }
            let nodes = s.road.nodes().iter().map(|&p| f(p, w, h)).collect();
            s.road = RoadNetwork::new(nodes, s.road.edges().to_vec()).ok()?;
            Some(s)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch: usize,
    pub steps: usize,
    pub seed: u64,
    /// Train on [`Example::augmented`] copies rather than the demonstrations alone.
    pub augment: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { lr: 1e-3, batch: 8, steps: 2000, seed: 0, augment: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: usize,
    /// Mean summed cross entropy per sequence over the batch.
    pub loss: f64,
    /// Teacher-forced argmax accuracy over the batch tokens.
    pub accuracy: f64,
}

pub fn loss_csv(records: &[LossRecord]) -> String {
    let mut out = String::from("step,loss,token_accuracy\n");
    for r in records {
        let _ = writeln!(out, "{},{},{}", r.step, r.loss, r.accuracy);
    }
    out
}

fn correct_tokens(logits: &Array2<f64>, teacher: &[usize]) -> usize {
    logits
        .axis_iter(Axis(0))
        .zip(teacher)
        .filter(|(row, &t)| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best == t
        })
        .count()
}

/// Mean sequence loss and token accuracy over `examples` without updating anything.
pub fn evaluate(model: &Model, examples: &[Example]) -> Result<(f64, f64)> {
    let (mut loss, mut correct, mut total) = (0.0, 0, 0);
    for ex in examples {
        let (f, logits, l) = ex.loss(model)?;
        loss += f.tape.value(l)[[0, 0]];
        correct += correct_tokens(f.tape.value(logits), &ex.tokens);
        total += ex.tokens.len();
    }
    Ok((loss / examples.len().max(1) as f64, correct as f64 / total.max(1) as f64))
}

/// Minibatch Adam on the teacher-forced loss. Batches depend only on `(seed, step)`, so a run
/// resumed from a checkpoint continues exactly as the uninterrupted one.
#[derive(Debug, Clone, PartialEq)]
pub struct Trainer {
    pub model: Model,
    pub adam: AdamState,
    pub config: TrainConfig,
    /// Completed steps.
    pub step: usize,
}

impl Trainer {
    pub fn new(model: Model, config: TrainConfig) -> Result<Self> {
        if config.batch == 0 || !(config.lr > 0.0) {
            return Err(NeuralError::Config("batch and lr must be positive".into()));
        }
        let adam = AdamState::new(AdamConfig { lr: config.lr, ..AdamConfig::default() }, &model.params);
        Ok(Self { model, adam, config, step: 0 })
    }

    /// Example indices of `step`: consecutive slices of per-epoch shuffles.
    pub fn batch_indices(&self, step: usize, n: usize) -> Vec<usize> {
        let b = self.config.batch;
        let mut out = Vec::with_capacity(b);
        let mut cached: Option<(usize, Vec<usize>)> = None;
        for k in step * b..(step + 1) * b {
            let epoch = k / n;
            if cached.as_ref().is_none_or(|(e, _)| *e != epoch) {
                let mut perm: Vec<usize> = (0..n).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
                rng.set_stream(epoch as u64);
                perm.shuffle(&mut rng);
                cached = Some((epoch, perm));
            }
            out.push(cached.as_ref().expect("permutation").1[k % n]);
        }
        out
    }

    pub fn step_once(&mut self, examples: &[Example]) -> Result<LossRecord> {
        if examples.is_empty() {
            return Err(NeuralError::Config("no training examples".into()));
        }
        let batch = self.batch_indices(self.step, examples.len());
        let mut grads: Vec<Array2<f64>> = self.model.params.tensors().iter().map(|t| Array2::zeros(t.dim())).collect();
        let (mut loss, mut correct, mut total) = (0.0, 0, 0);
        for &i in &batch {
            let ex = &examples[i];
            let (f, logits, l) = ex.loss(&self.model)?;
            loss += f.tape.value(l)[[0, 0]];
            correct += correct_tokens(f.tape.value(logits), &ex.tokens);
            total += ex.tokens.len();
            for (acc, g) in grads.iter_mut().zip(f.tape.backward(l, &self.model.params)) {
                *acc += &g;
            }
        }
        let scale = 1.0 / batch.len() as f64;
        loss *= scale;
        if !loss.is_finite() {
            return Err(NeuralError::NonFiniteLoss { step: self.step, batch });
        }
        grads.iter_mut().for_each(|g| *g *= scale);
        self.adam.update(&mut self.model.params, &grads);
        let record = LossRecord { step: self.step, loss, accuracy: correct as f64 / total as f64 };
        self.step += 1;
        Ok(record)
    }

    /// Steps until `config.steps` are done.
    pub fn run(&mut self, examples: &[Example]) -> Result<Vec<LossRecord>> {
        let mut out = Vec::new();
        while self.step < self.config.steps {
            out.push(self.step_once(examples)?);
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Checkpoint::capture(&self.model, Some((self.config, self.step, &self.adam))).save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let ck = Checkpoint::load(path)?;
        let model = ck.into_model_params()?;
        match (ck.train, ck.adam) {
            (Some(config), Some(adam)) => Ok(Self { model, adam, config, step: ck.step }),
            _ => Err(NeuralError::Checkpoint("no optimizer state to resume from".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

/// JSON dump of all parameter tensors, the model configuration and optionally the optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub model: ModelConfig,
    pub train: Option<TrainConfig>,
    pub step: usize,
    pub params: Vec<TensorRecord>,
    pub adam: Option<AdamState>,
}

pub const CHECKPOINT_VERSION: u32 = 1;

impl Checkpoint {
    pub fn capture(model: &Model, train: Option<(TrainConfig, usize, &AdamState)>) -> Self {
        let params = model
            .params
            .names()
            .iter()
            .zip(model.params.tensors())
            .map(|(name, t)| TensorRecord { name: name.clone(), shape: [t.nrows(), t.ncols()], values: t.iter().copied().collect() })
            .collect();
        Self {
            format_version: CHECKPOINT_VERSION,
            model: model.config,
            train: train.map(|t| t.0),
            step: train.map_or(0, |t| t.1),
            params,
            adam: train.map(|t| t.2.clone()),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let ck: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if ck.format_version != CHECKPOINT_VERSION {
            return Err(NeuralError::Checkpoint(format!("unsupported format_version {}", ck.format_version)));
        }
        Ok(ck)
    }

    /// Rebuilds the model, checking every tensor against the configuration's layout.
    pub fn into_model_params(&self) -> Result<Model> {
        let mut model = Model::new(self.model)?;
        let expected: ParamStore = model.params.clone();
        if expected.len() != self.params.len() {
            return Err(NeuralError::Checkpoint(format!("{} tensors, configuration needs {}", self.params.len(), expected.len())));
        }
        for (rec, (name, t)) in self.params.iter().zip(expected.names().iter().zip(expected.tensors())) {
            if &rec.name != name || rec.shape != [t.nrows(), t.ncols()] || rec.values.len() != t.len() {
                return Err(NeuralError::Checkpoint(format!("tensor {} does not match {name} {:?}", rec.name, t.dim())));
            }
            let dst = model.params.get_mut(name).expect("parameter exists");
            *dst = Array2::from_shape_vec((rec.shape[0], rec.shape[1]), rec.values.clone()).expect("shape checked");
        }
        Ok(model)
    }
}

pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    Checkpoint::capture(model, None).save(path)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    Checkpoint::load(path)?.into_model_params()
}
