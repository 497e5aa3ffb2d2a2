//! Loop-based reference implementations used as oracles for the tape-based model.
#![allow(dead_code)]

use copcs_core::scenario::{ContextGraph, NodeType};
use copcs_neural::{Model, Vocab};

pub type Mat = Vec<Vec<f64>>;

pub fn param(model: &Model, name: &str) -> Mat {
    let t = model.params.get(name).unwrap();
    t.rows().into_iter().map(|r| r.to_vec()).collect()
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for t in 0..k {
                s += a[i][t] * b[t][j];
            }
            out[i][j] = s;
        }
    }
    out
}

pub fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect()).collect()
}

pub fn add_row(a: &Mat, r: &[f64]) -> Mat {
    a.iter().map(|x| x.iter().zip(r).map(|(p, q)| p + q).collect()).collect()
}

pub fn layer_norm(a: &Mat, g: &[f64], b: &[f64]) -> Mat {
    a.iter()
        .map(|x| {
            let n = x.len() as f64;
            let mean = x.iter().sum::<f64>() / n;
            let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let s = (var + copcs_neural::tape::LN_EPS).sqrt();
            x.iter().enumerate().map(|(j, v)| (v - mean) / s * g[j] + b[j]).collect()
        })
        .collect()
}

/// `Σ_j softmax_j(q_i·k_j/√d) v_j` over the `j` with `allowed(i, j)`; zero when none is allowed.
pub fn attention(q: &Mat, k: &Mat, v: &Mat, allowed: impl Fn(usize, usize) -> bool) -> Mat {
    let d = q[0].len() as f64;
    let width = v[0].len();
    let mut out = vec![vec![0.0; width]; q.len()];
    for i in 0..q.len() {
        let js: Vec<usize> = (0..k.len()).filter(|&j| allowed(i, j)).collect();
        if js.is_empty() {
            continue;
        }
        let scores: Vec<f64> = js.iter().map(|&j| q[i].iter().zip(&k[j]).map(|(a, b)| a * b).sum::<f64>() / d.sqrt()).collect();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let total: f64 = w.iter().sum();
        for (&j, wj) in js.iter().zip(&w) {
            for c in 0..width {
                out[i][c] += wj / total * v[j][c];
            }
        }
    }
    out
}

const TYPES: [&str; 4] = ["task", "path", "uav", "ugv"];

pub fn encode_nodes(model: &Model, g: &ContextGraph) -> Mat {
    (0..g.n_nodes())
        .map(|i| {
            let ty = TYPES[g.node_types[i].index()];
            let w = param(model, &format!("enc.z.{ty}.w"));
            let b = param(model, &format!("enc.z.{ty}.b"));
            let mut z = b[0].clone();
            for (r, x) in g.features[i].iter().enumerate() {
                for c in 0..z.len() {
                    z[c] += x * w[r][c];
                }
            }
            z
        })
        .collect()
}

pub fn hgt_layer(model: &Model, g: &ContextGraph, h: &Mat, l: usize) -> Mat {
    let mut sum = h.clone();
    for set in ["intra", "uav", "ugv"] {
        let q = matmul(h, &param(model, &format!("enc.{l}.{set}.q")));
        let k = matmul(h, &param(model, &format!("enc.{l}.{set}.k")));
        let v = matmul(h, &param(model, &format!("enc.{l}.{set}.v")));
        let m = attention(&q, &k, &v, |i, j| match set {
            "intra" => g.intra.contains(i, j),
            "uav" => g.node_types[i] == NodeType::Uav && g.uav.contains(i, j),
            _ => g.node_types[i] == NodeType::Ugv && g.ugv.contains(i, j),
        });
        sum = add(&sum, &m);
    }
    layer_norm(&sum, &param(model, &format!("enc.{l}.ln.g"))[0], &param(model, &format!("enc.{l}.ln.b"))[0])
}

pub fn hgt_forward(model: &Model, g: &ContextGraph) -> Mat {
    let mut h = encode_nodes(model, g);
    for l in 0..model.config.l_enc {
        h = hgt_layer(model, g, &h, l);
    }
    h
}

pub fn mlp_encode(model: &Model, g: &ContextGraph) -> Mat {
    let z = encode_nodes(model, g);
    let a = add_row(&matmul(&z, &param(model, "mlp.w1")), &param(model, "mlp.b1")[0]);
    let a: Mat = a.iter().map(|r| r.iter().map(|x| 1.0 / (1.0 + (-x).exp())).collect()).collect();
    add_row(&matmul(&a, &param(model, "mlp.w2")), &param(model, "mlp.b2")[0])
}

/// Row of the action table for one token id.
pub fn action_row(model: &Model, g: &ContextGraph, vocab: &Vocab, h: &Mat, id: usize) -> Vec<f64> {
    use copcs_core::Action;
    let Some(a) = vocab.decode(id) else { return param(model, "dec.start")[0].clone() };
    let (kind, robot, target) = match a {
        Action::UavVisit { uav, task } => ("visit", g.uav_node(uav), g.task_node(task)),
        Action::UgvMove { ugv, node } => ("move", g.ugv_node(ugv), g.path_node(node)),
        Action::Recharge { uav, ugv } => ("recharge", g.uav_node(uav), g.ugv_node(ugv)),
    };
    let r = matmul(&vec![h[robot].clone()], &param(model, &format!("dec.{kind}.robot")));
    let t = matmul(&vec![h[target].clone()], &param(model, &format!("dec.{kind}.target")));
    add_row(&add(&r, &t), &param(model, &format!("dec.{kind}.kind"))[0]).remove(0)
}

/// All logits rows for the start token followed by `prefix`.
pub fn decoder(model: &Model, g: &ContextGraph, vocab: &Vocab, h: &Mat, prefix: &[usize]) -> Mat {
    let table: Mat = (0..vocab.size()).map(|id| action_row(model, g, vocab, h, id)).collect();
    let pos = param(model, "dec.pos");
    let mut tokens = vec![vocab.start()];
    tokens.extend_from_slice(prefix);
    let mut f: Mat = tokens.iter().enumerate().map(|(i, &t)| table[t].iter().zip(&pos[i]).map(|(a, b)| a + b).collect()).collect();
    for l in 0..model.config.l_dec {
        let p = |n: &str| param(model, &format!("dec.{l}.{n}"));
        let sa = attention(&matmul(&f, &p("self.q")), &matmul(&f, &p("self.k")), &matmul(&f, &p("self.v")), |i, j| j <= i);
        let ca = attention(&matmul(&f, &p("cross.q")), &matmul(h, &p("cross.k")), &matmul(h, &p("cross.v")), |_, _| true);
        f = layer_norm(&add(&add(&f, &sa), &ca), &p("ln.g")[0], &p("ln.b")[0]);
    }
    let o = matmul(&f, &param(model, "dec.out"));
    o.iter().map(|row| table.iter().map(|e| row.iter().zip(e).map(|(a, b)| a * b).sum()).collect()).collect()
}

/// Decoder where row `i` attends to `hs[i]` and scores against the table of `gs[i]`; token
/// `prefix[i - 1]` is embedded from the table of step `i - 1`.
pub fn decoder_stepwise(model: &Model, gs: &[ContextGraph], vocab: &Vocab, hs: &[Mat], prefix: &[usize]) -> Mat {
    let tables: Vec<Mat> = gs.iter().zip(hs).map(|(g, h)| (0..vocab.size()).map(|id| action_row(model, g, vocab, h, id)).collect()).collect();
    let pos = param(model, "dec.pos");
    let n = prefix.len() + 1;
    let mut f: Mat = (0..n)
        .map(|i| {
            let e = if i == 0 { &tables[0][vocab.start()] } else { &tables[i - 1][prefix[i - 1]] };
            e.iter().zip(&pos[i]).map(|(a, b)| a + b).collect()
        })
        .collect();
    for l in 0..model.config.l_dec {
        let p = |n: &str| param(model, &format!("dec.{l}.{n}"));
        let sa = attention(&matmul(&f, &p("self.q")), &matmul(&f, &p("self.k")), &matmul(&f, &p("self.v")), |i, j| j <= i);
        let q = matmul(&f, &p("cross.q"));
        let ca: Mat = (0..n)
            .map(|i| attention(&vec![q[i].clone()], &matmul(&hs[i], &p("cross.k")), &matmul(&hs[i], &p("cross.v")), |_, _| true).remove(0))
            .collect();
        f = layer_norm(&add(&add(&f, &sa), &ca), &p("ln.g")[0], &p("ln.b")[0]);
    }
    let o = matmul(&f, &param(model, "dec.out"));
    (0..n).map(|i| tables[i].iter().map(|e| o[i].iter().zip(e).map(|(a, b)| a * b).sum()).collect()).collect()
}

pub fn xent(logits: &Mat, targets: &[usize]) -> f64 {
    logits
        .iter()
        .zip(targets)
        .map(|(row, &t)| {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            lse - row[t]
        })
        .sum()
}

pub fn max_abs_diff(a: &Mat, b: &ndarray::Array2<f64>) -> f64 {
    assert_eq!((a.len(), a[0].len()), b.dim());
    let mut m: f64 = 0.0;
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            m = m.max((v - b[[i, j]]).abs());
        }
    }
    m
}
