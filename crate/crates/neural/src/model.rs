use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use copcs_core::scenario::{ContextGraph, NodeType};

use crate::decode::DecodeMode;
use crate::error::{NeuralError, Result};
use crate::params::{uniform, ParamStore};
use crate::tape::{Tape, Var};
use crate::vocab::Vocab;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    /// Typed graph attention over the three edge sets.
    Hgt,
    /// Per-node feedforward that ignores every edge.
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub encoder: EncoderKind,
    pub d: usize,
    pub l_enc: usize,
    pub l_dec: usize,
    /// Rows of the positional table, i.e. the longest plan the decoder can emit.
    pub max_len: usize,
    /// Team size the UGV feature width is built for.
    pub n_uav: usize,
    pub seed: u64,
    /// Conditioning the model is trained with and, by default, decoded with.
    pub context: DecodeMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::new(EncoderKind::Hgt, 1)
    }
}

impl ModelConfig {
    pub fn new(encoder: EncoderKind, n_uav: usize) -> Self {
        Self { encoder, d: 64, l_enc: 2, l_dec: 2, max_len: 96, n_uav, seed: 0, context: DecodeMode::EncodeOnce }
    }
}

const TYPE_NAMES: [&str; 4] = ["task", "path", "uav", "ugv"];
const SETS: [&str; 3] = ["intra", "uav", "ugv"];
const KINDS: [&str; 3] = ["visit", "move", "recharge"];

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
}

impl Model {
    /// Matrices uniform in `±1/√d`, layer-norm scales one, biases and shifts zero.
    pub fn new(config: ModelConfig) -> Result<Self> {
        if config.d == 0 || config.max_len == 0 || config.n_uav == 0 {
            return Err(NeuralError::Config("d, max_len and n_uav must be positive".into()));
        }
        let d = config.d;
        let b = 1.0 / (d as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut p = ParamStore::default();
        for ty in NodeType::ALL {
            let w = ContextGraph::feature_width(ty, config.n_uav);
            p.insert(&format!("enc.z.{}.w", TYPE_NAMES[ty.index()]), uniform(&mut rng, w, d, b));
            p.insert(&format!("enc.z.{}.b", TYPE_NAMES[ty.index()]), Array2::zeros((1, d)));
        }
        match config.encoder {
            EncoderKind::Hgt => {
                for l in 0..config.l_enc {
                    for set in SETS {
                        for m in ["q", "k", "v"] {
                            p.insert(&format!("enc.{l}.{set}.{m}"), uniform(&mut rng, d, d, b));
                        }
                    }
                    p.insert(&format!("enc.{l}.ln.g"), Array2::ones((1, d)));
                    p.insert(&format!("enc.{l}.ln.b"), Array2::zeros((1, d)));
                }
            }
            EncoderKind::Mlp => {
                p.insert("mlp.w1", uniform(&mut rng, d, d, b));
                p.insert("mlp.b1", Array2::zeros((1, d)));
                p.insert("mlp.w2", uniform(&mut rng, d, d, b));
                p.insert("mlp.b2", Array2::zeros((1, d)));
            }
        }
        p.insert("dec.pos", uniform(&mut rng, config.max_len, d, b));
        p.insert("dec.start", uniform(&mut rng, 1, d, b));
        for kind in KINDS {
            p.insert(&format!("dec.{kind}.kind"), uniform(&mut rng, 1, d, b));
            p.insert(&format!("dec.{kind}.robot"), uniform(&mut rng, d, d, b));
            p.insert(&format!("dec.{kind}.target"), uniform(&mut rng, d, d, b));
        }
        for l in 0..config.l_dec {
            for att in ["self", "cross"] {
                for m in ["q", "k", "v"] {
                    p.insert(&format!("dec.{l}.{att}.{m}"), uniform(&mut rng, d, d, b));
                }
            }
            p.insert(&format!("dec.{l}.ln.g"), Array2::ones((1, d)));
            p.insert(&format!("dec.{l}.ln.b"), Array2::zeros((1, d)));
        }
        p.insert("dec.out", uniform(&mut rng, d, d, b));
        Ok(Self { config, params: p })
    }

    pub fn forward(&self) -> Forward<'_> {
        Forward { tape: Tape::new(), model: self, bound: vec![None; self.params.len()], attention: Vec::new() }
    }

    /// Teacher-forced summed cross entropy of `teacher` on `graph`, plus the forward pass that
    /// produced it.
    pub fn loss(&self, graph: &ContextGraph, vocab: &Vocab, teacher: &[usize]) -> Result<(Forward<'_>, Var, Var)> {
        let mut f = self.forward();
        let h = f.encode(graph)?;
        let table = f.action_table(h, graph, vocab);
        let logits = f.decoder(h, table, vocab, &teacher[..teacher.len().saturating_sub(1)])?;
        let loss = f.tape.cross_entropy(logits, teacher);
        Ok((f, logits, loss))
    }

    /// Teacher-forced loss where position `t` is conditioned on `graphs[t]`, the context graph of
    /// the state before token `t`.
    pub fn loss_stepwise(&self, graphs: &[ContextGraph], vocab: &Vocab, teacher: &[usize]) -> Result<(Forward<'_>, Var, Var)> {
        let mut f = self.forward();
        let mut hs = Vec::with_capacity(graphs.len());
        let mut tables = Vec::with_capacity(graphs.len());
        for g in graphs {
            let h = f.encode(g)?;
            tables.push(f.action_table(h, g, vocab));
            hs.push(h);
        }
        let logits = f.decoder_stepwise(&hs, &tables, vocab, &teacher[..teacher.len().saturating_sub(1)])?;
        let loss = f.tape.cross_entropy(logits, teacher);
        Ok((f, logits, loss))
    }
}

/// Boolean attention masks of one context graph. Row `i` lists the nodes `i` may attend to.
#[derive(Debug, Clone)]
pub struct EdgeMasks {
    pub intra: Array2<bool>,
    /// Only UAV rows are populated.
    pub uav: Array2<bool>,
    /// Only UGV rows are populated.
    pub ugv: Array2<bool>,
}

impl EdgeMasks {
    pub fn new(g: &ContextGraph) -> Self {
        let n = g.n_nodes();
        let build = |into: Option<NodeType>, set: &copcs_core::scenario::EdgeSet| {
            Array2::from_shape_fn((n, n), |(i, j)| into.is_none_or(|t| g.node_types[i] == t) && set.contains(i, j))
        };
        Self { intra: build(None, &g.intra), uav: build(Some(NodeType::Uav), &g.uav), ugv: build(Some(NodeType::Ugv), &g.ugv) }
    }

    fn sets(&self) -> [&Array2<bool>; 3] {
        [&self.intra, &self.uav, &self.ugv]
    }
}

/// One forward pass: a tape plus the parameters bound to it so far.
pub struct Forward<'m> {
    pub tape: Tape,
    model: &'m Model,
    bound: Vec<Option<Var>>,
    /// Every attention probability matrix, in computation order.
    pub attention: Vec<Var>,
}

impl Forward<'_> {
    pub fn param(&mut self, name: &str) -> Var {
        let id = self.model.params.id(name).unwrap_or_else(|| panic!("unknown parameter {name}"));
        if let Some(v) = self.bound[id] {
            return v;
        }
        let v = self.tape.param(id, &self.model.params.tensors()[id]);
        self.bound[id] = Some(v);
        v
    }

    fn linear(&mut self, x: Var, w: &str) -> Var {
        let w = self.param(w);
        self.tape.matmul(x, w)
    }

    fn attend(&mut self, q: Var, k: Var, v: Var, mask: &Array2<bool>) -> Var {
        let d = self.model.config.d as f64;
        let s = self.tape.matmul_t(q, k);
        let s = self.tape.scale(s, 1.0 / d.sqrt());
        let p = self.tape.masked_softmax(s, mask);
        self.attention.push(p);
        self.tape.matmul(p, v)
    }

    fn norm(&mut self, x: Var, prefix: &str) -> Var {
        let y = self.tape.layer_norm(x);
        let g = self.param(&format!("{prefix}.ln.g"));
        let b = self.param(&format!("{prefix}.ln.b"));
        let y = self.tape.mul_row(y, g);
        self.tape.add_row(y, b)
    }

    /// Type-specific input projection `z = t W + b`, stacked in graph node order.
    pub fn encode_nodes(&mut self, g: &ContextGraph) -> Result<Var> {
        let mut blocks = Vec::new();
        for ty in NodeType::ALL {
            let range = g.range(ty);
            if range.is_empty() {
                continue;
            }
            let name = TYPE_NAMES[ty.index()];
            let width = ContextGraph::feature_width(ty, self.model.config.n_uav);
            let mut x = Array2::zeros((range.len(), width));
            for (r, i) in range.enumerate() {
                let f = &g.features[i];
                if f.len() != width {
                    return Err(NeuralError::FeatureWidth { node_type: name.into(), got: f.len(), expected: width });
                }
                if f.iter().any(|v| !v.is_finite()) {
                    return Err(NeuralError::NonFinite(format!("features of {name} node {i}")));
                }
                x.row_mut(r).assign(&ndarray::ArrayView1::from(f.as_slice()));
            }
            let x = self.tape.constant(x);
            let z = self.linear(x, &format!("enc.z.{name}.w"));
            let b = self.param(&format!("enc.z.{name}.b"));
            blocks.push(self.tape.add_row(z, b));
        }
        Ok(self.tape.concat_rows(&blocks))
    }

    /// `LN(h + Σ_intra α v + Σ_uav β v + Σ_ugv β v)`, one attention per edge set.
    pub fn hgt_layer(&mut self, h: Var, masks: &EdgeMasks, layer: usize) -> Var {
        let mut sum = h;
        for (set, mask) in SETS.iter().zip(masks.sets()) {
            let q = self.linear(h, &format!("enc.{layer}.{set}.q"));
            let k = self.linear(h, &format!("enc.{layer}.{set}.k"));
            let v = self.linear(h, &format!("enc.{layer}.{set}.v"));
            let m = self.attend(q, k, v, mask);
            sum = self.tape.add(sum, m);
        }
        self.norm(sum, &format!("enc.{layer}"))
    }

    pub fn hgt_forward(&mut self, g: &ContextGraph) -> Result<Var> {
        let masks = EdgeMasks::new(g);
        let mut h = self.encode_nodes(g)?;
        for l in 0..self.model.config.l_enc {
            h = self.hgt_layer(h, &masks, l);
        }
        Ok(h)
    }

    /// `σ(z W1 + b1) W2 + b2` per node, with σ the logistic sigmoid.
    pub fn mlp_encode(&mut self, g: &ContextGraph) -> Result<Var> {
        let z = self.encode_nodes(g)?;
        let a = self.linear(z, "mlp.w1");
        let b1 = self.param("mlp.b1");
        let a = self.tape.add_row(a, b1);
        let a = self.tape.sigmoid(a);
        let o = self.linear(a, "mlp.w2");
        let b2 = self.param("mlp.b2");
        Ok(self.tape.add_row(o, b2))
    }

    pub fn encode(&mut self, g: &ContextGraph) -> Result<Var> {
        match self.model.config.encoder {
            EncoderKind::Hgt => self.hgt_forward(g),
            EncoderKind::Mlp => self.mlp_encode(g),
        }
    }

    /// Embedding of every action id, `vocab.size() × d`. An action's row is its kind vector plus
    /// projections of the embeddings of the robot it commands and the node it targets, so the
    /// table is bound to the current nodes rather than to their indices. The last row is the start
    /// token.
    pub fn action_table(&mut self, h: Var, g: &ContextGraph, vocab: &Vocab) -> Var {
        let mut blocks = Vec::new();
        for kind in KINDS {
            let (robots, targets): (Vec<usize>, Vec<usize>) = match kind {
                "visit" => (0..vocab.n_uav).flat_map(|u| (0..vocab.n_tasks).map(move |t| (g.uav_node(u), g.task_node(t)))).unzip(),
                "move" => (0..vocab.n_ugv).flat_map(|u| (0..vocab.n_paths).map(move |n| (g.ugv_node(u), g.path_node(n)))).unzip(),
                _ => (0..vocab.n_uav).flat_map(|u| (0..vocab.n_ugv).map(move |v| (g.uav_node(u), g.ugv_node(v)))).unzip(),
            };
            if robots.is_empty() {
                continue;
            }
            let r = self.tape.gather_rows(h, &robots);
            let r = self.linear(r, &format!("dec.{kind}.robot"));
            let t = self.tape.gather_rows(h, &targets);
            let t = self.linear(t, &format!("dec.{kind}.target"));
            let e = self.tape.add(r, t);
            let k = self.param(&format!("dec.{kind}.kind"));
            blocks.push(self.tape.add_row(e, k));
        }
        blocks.push(self.param("dec.start"));
        self.tape.concat_rows(&blocks)
    }

    /// Logits for positions `1..=prefix.len() + 1`: row `t - 1` is `u_t`, computed from the start
    /// token followed by `prefix[..t - 1]`.
    pub fn decoder(&mut self, h: Var, table: Var, vocab: &Vocab, prefix: &[usize]) -> Result<Var> {
        let len = prefix.len() + 1;
        if len > self.model.config.max_len {
            return Err(NeuralError::SequenceTooLong { len, max: self.model.config.max_len });
        }
        if let Some(&bad) = prefix.iter().find(|&&t| t >= vocab.size()) {
            return Err(NeuralError::TokenOutOfVocab { token: bad, vocab: vocab.size() });
        }
        let mut tokens = Vec::with_capacity(len);
        tokens.push(vocab.start());
        tokens.extend_from_slice(prefix);
        let x = self.tape.gather_rows(table, &tokens);
        let pos = self.param("dec.pos");
        let positions: Vec<usize> = (0..len).collect();
        let pos = self.tape.gather_rows(pos, &positions);
        let mut f = self.tape.add(x, pos);

        let causal = Array2::from_shape_fn((len, len), |(i, j)| j <= i);
        let all = Array2::from_elem((len, self.tape.value(h).nrows()), true);
        for l in 0..self.model.config.l_dec {
            let q = self.linear(f, &format!("dec.{l}.self.q"));
            let k = self.linear(f, &format!("dec.{l}.self.k"));
            let v = self.linear(f, &format!("dec.{l}.self.v"));
            let sa = self.attend(q, k, v, &causal);
            let qc = self.linear(f, &format!("dec.{l}.cross.q"));
            let kc = self.linear(h, &format!("dec.{l}.cross.k"));
            let vc = self.linear(h, &format!("dec.{l}.cross.v"));
            let ca = self.attend(qc, kc, vc, &all);
            let s = self.tape.add(f, sa);
            let s = self.tape.add(s, ca);
            f = self.norm(s, &format!("dec.{l}"));
        }
        let o = self.linear(f, "dec.out");
        Ok(self.tape.matmul_t(o, table))
    }

    /// Decoder whose row `i` cross-attends to `hs[i]` and scores actions against `tables[i]`.
    /// Token `prefix[i - 1]` is embedded with `tables[i - 1]`, the table it was chosen from. With
    /// identical entries this is [`Forward::decoder`].
    pub fn decoder_stepwise(&mut self, hs: &[Var], tables: &[Var], vocab: &Vocab, prefix: &[usize]) -> Result<Var> {
        let len = prefix.len() + 1;
        if hs.len() != len || tables.len() != len {
            return Err(NeuralError::Config(format!("{} memories and {} tables for {len} positions", hs.len(), tables.len())));
        }
        if len > self.model.config.max_len {
            return Err(NeuralError::SequenceTooLong { len, max: self.model.config.max_len });
        }
        if let Some(&bad) = prefix.iter().find(|&&t| t >= vocab.size()) {
            return Err(NeuralError::TokenOutOfVocab { token: bad, vocab: vocab.size() });
        }
        let rows: Vec<Var> = (0..len)
            .map(|i| if i == 0 { self.tape.gather_rows(tables[0], &[vocab.start()]) } else { self.tape.gather_rows(tables[i - 1], &[prefix[i - 1]]) })
            .collect();
        let x = self.tape.concat_rows(&rows);
        let pos = self.param("dec.pos");
        let positions: Vec<usize> = (0..len).collect();
        let pos = self.tape.gather_rows(pos, &positions);
        let mut f = self.tape.add(x, pos);

        let causal = Array2::from_shape_fn((len, len), |(i, j)| j <= i);
        for l in 0..self.model.config.l_dec {
            let q = self.linear(f, &format!("dec.{l}.self.q"));
            let k = self.linear(f, &format!("dec.{l}.self.k"));
            let v = self.linear(f, &format!("dec.{l}.self.v"));
            let sa = self.attend(q, k, v, &causal);
            let qc = self.linear(f, &format!("dec.{l}.cross.q"));
            let mut ca = Vec::with_capacity(len);
            for (i, &h) in hs.iter().enumerate() {
                let qi = self.tape.gather_rows(qc, &[i]);
                let kc = self.linear(h, &format!("dec.{l}.cross.k"));
                let vc = self.linear(h, &format!("dec.{l}.cross.v"));
                let all = Array2::from_elem((1, self.tape.value(h).nrows()), true);
                ca.push(self.attend(qi, kc, vc, &all));
            }
            let ca = self.tape.concat_rows(&ca);
            let s = self.tape.add(f, sa);
            let s = self.tape.add(s, ca);
            f = self.norm(s, &format!("dec.{l}"));
        }
        let o = self.linear(f, "dec.out");
        let logits: Vec<Var> = (0..len)
            .map(|i| {
                let oi = self.tape.gather_rows(o, &[i]);
                self.tape.matmul_t(oi, tables[i])
            })
            .collect();
        Ok(self.tape.concat_rows(&logits))
    }
}
