//! Reverse-mode differentiation over row-major 2-D `f64` matrices.
//!
//! A [`Tape`] records every operation of one forward pass. [`Tape::backward`] walks it in reverse
//! and returns the gradient of a scalar output for every parameter leaf.

use ndarray::{s, Array1, Array2, Axis, Zip};

use crate::params::ParamStore;

/// Handle to a recorded value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(usize),
    MatMul(Var, Var),
    /// `a · bᵀ`
    MatMulT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Scale(Var, f64),
    /// Row-wise normalization to zero mean and unit variance; keeps `1/σ` per row.
    LayerNorm(Var, Array1<f64>),
    /// Row-wise softmax over the unmasked entries. Masked entries, and rows with nothing
    /// unmasked, come out as zero.
    MaskedSoftmax(Var),
    GatherRows(Var, Vec<usize>),
    ConcatRows(Vec<Var>),
    Sigmoid(Var),
    /// Summed cross entropy of each row against its target column.
    CrossEntropy(Var, Vec<usize>),
}

struct Node {
    value: Array2<f64>,
    op: Op,
}

/// Epsilon added to the variance in layer normalization.
pub const LN_EPS: f64 = 1e-10;

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Records parameter `id`; its gradient is reported by [`Tape::backward`].
    pub fn param(&mut self, id: usize, value: &Array2<f64>) -> Var {
        self.push(value.clone(), Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(&self.value(b).t());
        self.push(v, Op::MatMulT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    /// Adds the `1 × n` row `r` to every row of `a`.
    pub fn add_row(&mut self, a: Var, r: Var) -> Var {
        let v = self.value(a) + self.value(r);
        self.push(v, Op::AddRow(a, r))
    }

    /// Multiplies every row of `a` elementwise by the `1 × n` row `r`.
    pub fn mul_row(&mut self, a: Var, r: Var) -> Var {
        let v = self.value(a) * self.value(r);
        self.push(v, Op::MulRow(a, r))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) * c;
        self.push(v, Op::Scale(a, c))
    }

    pub fn layer_norm(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut y = x.clone();
        let mut inv = Array1::zeros(x.nrows());
        for (mut row, s) in y.rows_mut().into_iter().zip(inv.iter_mut()) {
            let n = row.len() as f64;
            let mean = row.sum() / n;
            row.mapv_inplace(|v| v - mean);
            let var = row.iter().map(|v| v * v).sum::<f64>() / n;
            *s = 1.0 / (var + LN_EPS).sqrt();
            let k = *s;
            row.mapv_inplace(|v| v * k);
        }
        self.push(y, Op::LayerNorm(a, inv))
    }

    pub fn masked_softmax(&mut self, a: Var, mask: &Array2<bool>) -> Var {
        let x = self.value(a);
        assert_eq!(x.dim(), mask.dim(), "softmax mask shape");
        let mut p = Array2::zeros(x.dim());
        for ((mut prow, xrow), mrow) in p.rows_mut().into_iter().zip(x.rows()).zip(mask.rows()) {
            let max = xrow.iter().zip(mrow).filter(|(_, &m)| m).map(|(v, _)| *v).fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                continue;
            }
            let mut total = 0.0;
            for ((pv, xv), &m) in prow.iter_mut().zip(xrow).zip(mrow) {
                if m {
                    *pv = (xv - max).exp();
                    total += *pv;
                }
            }
            prow.mapv_inplace(|v| v / total);
        }
        self.push(p, Op::MaskedSoftmax(a))
    }

    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Var {
        let v = self.value(a).select(Axis(0), rows);
        self.push(v, Op::GatherRows(a, rows.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = ndarray::concatenate(Axis(0), &views).expect("concat_rows needs equal widths");
        self.push(v, Op::ConcatRows(parts.to_vec()))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    /// `Σ_r −log softmax(a_r)[targets[r]]` as a `1 × 1` value.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Var {
        let x = self.value(logits);
        assert_eq!(x.nrows(), targets.len(), "one target per row");
        let mut loss = 0.0;
        for (row, &t) in x.rows().into_iter().zip(targets) {
            loss += log_sum_exp(row.as_slice().expect("standard layout")) - row[t];
        }
        self.push(Array2::from_elem((1, 1), loss), Op::CrossEntropy(logits, targets.to_vec()))
    }

    /// Gradients of the `1 × 1` value `out` with respect to every parameter of `store`. Parameters
    /// not on the tape get zeros.
    pub fn backward(&self, out: Var, store: &ParamStore) -> Vec<Array2<f64>> {
        assert_eq!(self.value(out).dim(), (1, 1), "backward needs a scalar");
        let mut grads: Vec<Option<Array2<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[out.0] = Some(Array2::ones((1, 1)));
        let mut params: Vec<Array2<f64>> = store.tensors().iter().map(|t| Array2::zeros(t.dim())).collect();

        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let mut acc = |v: Var, d: Array2<f64>| match &mut grads[v.0] {
                Some(x) => *x += &d,
                slot => *slot = Some(d),
            };
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => params[*id] += &g,
                Op::MatMul(a, b) => {
                    acc(*a, g.dot(&self.value(*b).t()));
                    acc(*b, self.value(*a).t().dot(&g));
                }
                Op::MatMulT(a, b) => {
                    acc(*a, g.dot(self.value(*b)));
                    acc(*b, g.t().dot(self.value(*a)));
                }
                Op::Add(a, b) => {
                    acc(*b, g.clone());
                    acc(*a, g);
                }
                Op::AddRow(a, r) => {
                    acc(*r, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(*a, g);
                }
                Op::MulRow(a, r) => {
                    acc(*r, (&g * self.value(*a)).sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(*a, g * self.value(*r));
                }
                Op::Scale(a, c) => acc(*a, g * *c),
                Op::LayerNorm(a, inv) => {
                    let y = &node.value;
                    let mut dx = g;
                    for ((mut drow, yrow), &s) in dx.rows_mut().into_iter().zip(y.rows()).zip(inv) {
                        let n = drow.len() as f64;
                        let mean_g = drow.sum() / n;
                        let mean_gy = drow.iter().zip(yrow).map(|(a, b)| a * b).sum::<f64>() / n;
                        Zip::from(&mut drow).and(&yrow).for_each(|d, &yv| *d = s * (*d - mean_g - yv * mean_gy));
                    }
                    acc(*a, dx);
                }
                Op::MaskedSoftmax(a) => {
                    let p = &node.value;
                    let mut dx = g;
                    for (mut drow, prow) in dx.rows_mut().into_iter().zip(p.rows()) {
                        let dot = drow.iter().zip(prow).map(|(a, b)| a * b).sum::<f64>();
                        Zip::from(&mut drow).and(&prow).for_each(|d, &pv| *d = pv * (*d - dot));
                    }
                    acc(*a, dx);
                }
                Op::GatherRows(a, rows) => {
                    let mut dx = Array2::zeros(self.value(*a).dim());
                    for (k, &r) in rows.iter().enumerate() {
                        let mut dst = dx.row_mut(r);
                        dst += &g.row(k);
                    }
                    acc(*a, dx);
                }
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let n = self.value(p).nrows();
                        acc(p, g.slice(s![start..start + n, ..]).to_owned());
                        start += n;
                    }
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    acc(*a, g * &y.mapv(|s| s * (1.0 - s)));
                }
                Op::CrossEntropy(a, targets) => {
                    let scale = g[[0, 0]];
                    let x = self.value(*a);
                    let mut dx = Array2::zeros(x.dim());
                    for ((mut drow, xrow), &t) in dx.rows_mut().into_iter().zip(x.rows()).zip(targets) {
                        let lse = log_sum_exp(xrow.as_slice().expect("standard layout"));
                        Zip::from(&mut drow).and(&xrow).for_each(|d, &v| *d = scale * (v - lse).exp());
                        drow[t] -= scale;
                    }
                    acc(*a, dx);
                }
            }
        }
        params
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
