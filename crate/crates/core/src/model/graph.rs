//! Tape-based reverse-mode autodiff over 2-D f64 tensors.

use super::gmm::{self, GmmHead, GmmTarget, LossReport};
use super::tensor::{dot, matmul_acc, matmul_at_acc, matmul_bt_acc, Tensor};
use super::{LossConfig, ModelError, ModelParams, ParamId};
use std::sync::Arc;

const NORM_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Allowed key rows for every query row of an attention op.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Pattern {
    pub keys: Vec<Vec<u32>>,
}

impl Pattern {
    pub fn queries(&self) -> usize {
        self.keys.len()
    }

    fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.keys.len() + 1);
        let mut acc = 0;
        off.push(0);
        for k in &self.keys {
            acc += k.len();
            off.push(acc);
        }
        off
    }
}

/// Sparse row mixing: output row `i` is `Σ w · x[j]` over `(j, w)` in `rows[i]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RowMix {
    pub rows: Vec<Vec<(usize, f64)>>,
}

enum Op {
    Input,
    Param(ParamId),
    Linear { x: Var, w: Var, b: Var },
    Add(Var, Var),
    Gelu(Var),
    LayerNorm { x: Var, g: Var, b: Var, xhat: Tensor, inv: Vec<f64> },
    BatchNorm { x: Var, g: Var, b: Var, mask: Arc<Vec<bool>>, xhat: Tensor, inv: Vec<f64> },
    MaskRows { x: Var, mask: Arc<Vec<bool>> },
    Attention { q: Var, k: Var, v: Var, heads: usize, pattern: Arc<Pattern>, weights: Vec<f64>, offsets: Vec<usize> },
    RowMix { x: Var, mix: Arc<RowMix> },
    GmmLoss { raw: Var, grad: Tensor },
}

struct Node {
    op: Op,
    value: Tensor,
}

/// A recorded forward computation. Parameter values are borrowed, not copied.
pub struct Graph<'p> {
    params: &'p ModelParams,
    nodes: Vec<Node>,
    record: bool,
}

/// Per-parameter gradients, aligned with [`ModelParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Tensor>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self { tensors: params.values.iter().map(|t| Tensor::zeros(t.rows, t.cols)).collect() }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.tensors.iter_mut().for_each(|t| t.scale(s));
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors.iter().flat_map(|t| t.data.iter()).fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn shape_err(what: &str, got: (usize, usize), want: (usize, usize)) -> ModelError {
    ModelError::ShapeMismatch(format!("{what}: got {}x{}, expected {}x{}", got.0, got.1, want.0, want.1))
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

impl<'p> Graph<'p> {
    /// A graph that records everything needed for [`Graph::backward`].
    pub fn new(params: &'p ModelParams) -> Self {
        Self { params, nodes: Vec::with_capacity(256), record: true }
    }

    /// Forward-only graph; `backward` fails with `GraphNotRecorded`.
    pub fn inference(params: &'p ModelParams) -> Self {
        Self { params, nodes: Vec::with_capacity(256), record: false }
    }

    pub fn params(&self) -> &'p ModelParams {
        self.params
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        match self.nodes[v.0].op {
            Op::Param(id) => &self.params.values[id.0],
            _ => &self.nodes[v.0].value,
        }
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(Op::Input, t)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.push(Op::Param(id), Tensor::zeros(0, 0))
    }

    pub fn param_named(&mut self, name: &str) -> Result<Var, ModelError> {
        let id = self.params.id(name).ok_or_else(|| ModelError::ShapeMismatch(format!("no parameter {name}")))?;
        Ok(self.param(id))
    }

    /// `x · w + b`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var, ModelError> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        if xv.cols != wv.rows {
            return Err(shape_err("linear input", xv.shape(), (xv.rows, wv.rows)));
        }
        if bv.shape() != (1, wv.cols) {
            return Err(shape_err("linear bias", bv.shape(), (1, wv.cols)));
        }
        let mut out = Tensor::zeros(xv.rows, wv.cols);
        for i in 0..xv.rows {
            out.row_mut(i).copy_from_slice(&bv.data);
        }
        matmul_acc(xv, wv, &mut out);
        Ok(self.push(Op::Linear { x, w, b }, out))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, ModelError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(shape_err("add", bv.shape(), av.shape()));
        }
        let mut out = av.clone();
        out.add_assign(bv);
        Ok(self.push(Op::Add(a, b), out))
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        out.data.iter_mut().for_each(|v| *v = gelu(*v));
        self.push(Op::Gelu(x), out)
    }

    /// Per-row normalization with learned gain and bias.
    pub fn layer_norm(&mut self, x: Var, g: Var, b: Var) -> Result<Var, ModelError> {
        let (xv, gv, bv) = (self.value(x), self.value(g), self.value(b));
        if gv.shape() != (1, xv.cols) || bv.shape() != (1, xv.cols) {
            return Err(shape_err("layer norm gain", gv.shape(), (1, xv.cols)));
        }
        let n = xv.cols as f64;
        let mut xhat = Tensor::zeros(xv.rows, xv.cols);
        let mut out = Tensor::zeros(xv.rows, xv.cols);
        let mut inv = Vec::with_capacity(xv.rows);
        for i in 0..xv.rows {
            let r = xv.row(i);
            let mean = r.iter().sum::<f64>() / n;
            let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let s = 1.0 / (var + NORM_EPS).sqrt();
            inv.push(s);
            for c in 0..xv.cols {
                let h = (r[c] - mean) * s;
                xhat.data[i * xv.cols + c] = h;
                out.data[i * xv.cols + c] = h * gv.data[c] + bv.data[c];
            }
        }
        Ok(self.push(Op::LayerNorm { x, g, b, xhat, inv }, out))
    }

    /// Per-column normalization over the rows where `mask` is set; other rows become zero.
    pub fn masked_batch_norm(&mut self, x: Var, g: Var, b: Var, mask: Arc<Vec<bool>>) -> Result<Var, ModelError> {
        let (xv, gv, bv) = (self.value(x), self.value(g), self.value(b));
        if mask.len() != xv.rows {
            return Err(shape_err("batch norm mask", (mask.len(), 1), (xv.rows, 1)));
        }
        if gv.shape() != (1, xv.cols) || bv.shape() != (1, xv.cols) {
            return Err(shape_err("batch norm gain", gv.shape(), (1, xv.cols)));
        }
        let cols = xv.cols;
        let n = mask.iter().filter(|&&m| m).count();
        let mut xhat = Tensor::zeros(xv.rows, cols);
        let mut out = Tensor::zeros(xv.rows, cols);
        let mut inv = vec![0.0; cols];
        if n > 0 {
            let nf = n as f64;
            for c in 0..cols {
                let mean = (0..xv.rows).filter(|&i| mask[i]).map(|i| xv.get(i, c)).sum::<f64>() / nf;
                let var = (0..xv.rows).filter(|&i| mask[i]).map(|i| (xv.get(i, c) - mean).powi(2)).sum::<f64>() / nf;
                let s = 1.0 / (var + NORM_EPS).sqrt();
                inv[c] = s;
                for i in (0..xv.rows).filter(|&i| mask[i]) {
                    let h = (xv.get(i, c) - mean) * s;
                    xhat.data[i * cols + c] = h;
                    out.data[i * cols + c] = h * gv.data[c] + bv.data[c];
                }
            }
        }
        Ok(self.push(Op::BatchNorm { x, g, b, mask, xhat, inv }, out))
    }

    pub fn mask_rows(&mut self, x: Var, mask: Arc<Vec<bool>>) -> Result<Var, ModelError> {
        let xv = self.value(x);
        if mask.len() != xv.rows {
            return Err(shape_err("row mask", (mask.len(), 1), (xv.rows, 1)));
        }
        let mut out = xv.clone();
        for (i, &m) in mask.iter().enumerate() {
            if !m {
                out.row_mut(i).fill(0.0);
            }
        }
        Ok(self.push(Op::MaskRows { x, mask }, out))
    }

    /// Multi-head scaled dot-product attention restricted to `pattern`.
    /// Query rows with no allowed keys produce zeros.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, heads: usize, pattern: Arc<Pattern>) -> Result<Var, ModelError> {
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        if kv.shape() != vv.shape() || qv.cols != kv.cols {
            return Err(shape_err("attention keys/values", kv.shape(), (vv.rows, qv.cols)));
        }
        if pattern.queries() != qv.rows {
            return Err(shape_err("attention pattern", (pattern.queries(), 0), (qv.rows, 0)));
        }
        if heads == 0 || qv.cols % heads != 0 {
            return Err(ModelError::InvalidConfig(format!("width {} not divisible by {heads} heads", qv.cols)));
        }
        if pattern.keys.iter().flatten().any(|&j| j as usize >= kv.rows) {
            return Err(ModelError::ShapeMismatch("attention pattern key out of range".into()));
        }
        let dh = qv.cols / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let offsets = pattern.offsets();
        let mut weights = vec![0.0; offsets[offsets.len() - 1] * heads];
        let mut out = Tensor::zeros(qv.rows, qv.cols);
        let mut scores = Vec::new();
        for (i, keys) in pattern.keys.iter().enumerate() {
            if keys.is_empty() {
                continue;
            }
            let n = keys.len();
            for h in 0..heads {
                let cols = h * dh..(h + 1) * dh;
                let qi = &qv.row(i)[cols.clone()];
                scores.clear();
                scores.extend(keys.iter().map(|&j| dot(qi, &kv.row(j as usize)[cols.clone()]) * scale));
                let mx = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for s in scores.iter_mut() {
                    *s = (*s - mx).exp();
                    z += *s;
                }
                let w = &mut weights[offsets[i] * heads + h * n..offsets[i] * heads + (h + 1) * n];
                let o = &mut out.data[i * qv.cols + h * dh..i * qv.cols + (h + 1) * dh];
                for ((wj, &s), &j) in w.iter_mut().zip(&scores).zip(keys) {
                    *wj = s / z;
                    for (ov, &vv) in o.iter_mut().zip(&vv.row(j as usize)[cols.clone()]) {
                        *ov += *wj * vv;
                    }
                }
            }
        }
        Ok(self.push(Op::Attention { q, k, v, heads, pattern, weights, offsets }, out))
    }

    /// Attention weights of a recorded attention node: `(query, head) -> weights over its keys`.
    pub fn attention_weights(&self, v: Var, query: usize, head: usize) -> Option<&[f64]> {
        match &self.nodes[v.0].op {
            Op::Attention { heads, weights, offsets, .. } => {
                let n = offsets[query + 1] - offsets[query];
                let base = offsets[query] * heads + head * n;
                Some(&weights[base..base + n])
            }
            _ => None,
        }
    }

    pub fn row_mix(&mut self, x: Var, mix: Arc<RowMix>) -> Result<Var, ModelError> {
        let xv = self.value(x);
        if mix.rows.iter().flatten().any(|&(j, _)| j >= xv.rows) {
            return Err(ModelError::ShapeMismatch("row mix source out of range".into()));
        }
        let mut out = Tensor::zeros(mix.rows.len(), xv.cols);
        for (i, src) in mix.rows.iter().enumerate() {
            let o = out.row_mut(i);
            for &(j, w) in src {
                for (ov, &xv) in o.iter_mut().zip(xv.row(j)) {
                    *ov += w * xv;
                }
            }
        }
        Ok(self.push(Op::RowMix { x, mix }, out))
    }

    /// Scalar training loss from raw decoder outputs.
    pub fn gmm_loss(&mut self, raw: Var, head: &GmmHead, target: &GmmTarget, cfg: &LossConfig) -> Result<(Var, LossReport), ModelError> {
        let (report, grad) = gmm::loss_and_grad(self.value(raw), head, target, cfg)?;
        let v = self.push(Op::GmmLoss { raw, grad }, Tensor::scalar(report.total));
        Ok((v, report))
    }

    /// Reverse pass from the scalar `out`.
    pub fn backward(&self, out: Var) -> Result<Gradients, ModelError> {
        if !self.record || out.0 >= self.nodes.len() {
            return Err(ModelError::GraphNotRecorded);
        }
        if self.value(out).shape() != (1, 1) {
            return Err(shape_err("backward output", self.value(out).shape(), (1, 1)));
        }
        let mut params = Gradients::zeros_like(self.params);
        let mut grads: Vec<Option<Tensor>> = (0..=out.0).map(|_| None).collect();
        grads[out.0] = Some(Tensor::scalar(1.0));
        for idx in (0..=out.0).rev() {
            let Some(dy) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Param(id) => params.tensors[id.0].add_assign(&dy),
                Op::Linear { x, w, b } => {
                    let (xv, wv) = (self.value(*x), self.value(*w));
                    let mut dx = Tensor::zeros(xv.rows, xv.cols);
                    matmul_bt_acc(&dy, wv, &mut dx);
                    let mut dw = Tensor::zeros(wv.rows, wv.cols);
                    matmul_at_acc(xv, &dy, &mut dw);
                    let mut db = Tensor::zeros(1, wv.cols);
                    for i in 0..dy.rows {
                        for (d, &g) in db.data.iter_mut().zip(dy.row(i)) {
                            *d += g;
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                    accumulate(&mut grads, *w, dw);
                    accumulate(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, dy.clone());
                    accumulate(&mut grads, *b, dy);
                }
                Op::Gelu(x) => {
                    let mut dx = dy;
                    for (d, &xv) in dx.data.iter_mut().zip(&self.value(*x).data) {
                        *d *= gelu_grad(xv);
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::LayerNorm { x, g, b, xhat, inv } => {
                    let gv = self.value(*g);
                    let cols = xhat.cols;
                    let n = cols as f64;
                    let mut dx = Tensor::zeros(xhat.rows, cols);
                    let mut dg = Tensor::zeros(1, cols);
                    let mut db = Tensor::zeros(1, cols);
                    let mut dh = vec![0.0; cols];
                    for i in 0..xhat.rows {
                        let (dyr, hr) = (dy.row(i), xhat.row(i));
                        for c in 0..cols {
                            dh[c] = dyr[c] * gv.data[c];
                            dg.data[c] += dyr[c] * hr[c];
                            db.data[c] += dyr[c];
                        }
                        let m1 = dh.iter().sum::<f64>() / n;
                        let m2 = dh.iter().zip(hr).map(|(a, b)| a * b).sum::<f64>() / n;
                        for (c, d) in dx.row_mut(i).iter_mut().enumerate() {
                            *d = inv[i] * (dh[c] - m1 - hr[c] * m2);
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                    accumulate(&mut grads, *g, dg);
                    accumulate(&mut grads, *b, db);
                }
                Op::BatchNorm { x, g, b, mask, xhat, inv } => {
                    let gv = self.value(*g);
                    let cols = xhat.cols;
                    let rows: Vec<usize> = (0..xhat.rows).filter(|&i| mask[i]).collect();
                    let n = rows.len() as f64;
                    let mut dx = Tensor::zeros(xhat.rows, cols);
                    let mut dg = Tensor::zeros(1, cols);
                    let mut db = Tensor::zeros(1, cols);
                    for c in 0..cols {
                        let (mut m1, mut m2) = (0.0, 0.0);
                        for &i in &rows {
                            let d = dy.get(i, c);
                            dg.data[c] += d * xhat.get(i, c);
                            db.data[c] += d;
                            m1 += d * gv.data[c];
                            m2 += d * gv.data[c] * xhat.get(i, c);
                        }
                        if rows.is_empty() {
                            continue;
                        }
                        m1 /= n;
                        m2 /= n;
                        for &i in &rows {
                            let dh = dy.get(i, c) * gv.data[c];
                            dx.data[i * cols + c] = inv[c] * (dh - m1 - xhat.get(i, c) * m2);
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                    accumulate(&mut grads, *g, dg);
                    accumulate(&mut grads, *b, db);
                }
                Op::MaskRows { x, mask } => {
                    let mut dx = dy;
                    for (i, &m) in mask.iter().enumerate() {
                        if !m {
                            dx.row_mut(i).fill(0.0);
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::Attention { q, k, v, heads, pattern, weights, offsets } => {
                    let (qv, kv, vv) = (self.value(*q), self.value(*k), self.value(*v));
                    let dh = qv.cols / heads;
                    let scale = 1.0 / (dh as f64).sqrt();
                    let mut dq = Tensor::zeros(qv.rows, qv.cols);
                    let mut dk = Tensor::zeros(kv.rows, kv.cols);
                    let mut dv = Tensor::zeros(vv.rows, vv.cols);
                    let mut da = Vec::new();
                    for (i, keys) in pattern.keys.iter().enumerate() {
                        let n = keys.len();
                        if n == 0 {
                            continue;
                        }
                        for h in 0..*heads {
                            let cols = h * dh..(h + 1) * dh;
                            let w = &weights[offsets[i] * heads + h * n..offsets[i] * heads + (h + 1) * n];
                            let dyi = &dy.row(i)[cols.clone()];
                            da.clear();
                            da.extend(keys.iter().map(|&j| dot(dyi, &vv.row(j as usize)[cols.clone()])));
                            let wda: f64 = w.iter().zip(&da).map(|(a, b)| a * b).sum();
                            let qi: Vec<f64> = qv.row(i)[cols.clone()].to_vec();
                            for (jj, &j) in keys.iter().enumerate() {
                                let j = j as usize;
                                for (d, &g) in dv.row_mut(j)[cols.clone()].iter_mut().zip(dyi) {
                                    *d += w[jj] * g;
                                }
                                let ds = w[jj] * (da[jj] - wda) * scale;
                                if ds == 0.0 {
                                    continue;
                                }
                                for (d, &kk) in dq.row_mut(i)[cols.clone()].iter_mut().zip(&kv.row(j)[cols.clone()]) {
                                    *d += ds * kk;
                                }
                                for (d, &qq) in dk.row_mut(j)[cols.clone()].iter_mut().zip(&qi) {
                                    *d += ds * qq;
                                }
                            }
                        }
                    }
                    accumulate(&mut grads, *q, dq);
                    accumulate(&mut grads, *k, dk);
                    accumulate(&mut grads, *v, dv);
                }
                Op::RowMix { x, mix } => {
                    let xv = self.value(*x);
                    let mut dx = Tensor::zeros(xv.rows, xv.cols);
                    for (i, src) in mix.rows.iter().enumerate() {
                        for &(j, w) in src {
                            for (d, &g) in dx.row_mut(j).iter_mut().zip(dy.row(i)) {
                                *d += w * g;
                            }
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::GmmLoss { raw, grad } => {
                    let mut dr = grad.clone();
                    dr.scale(dy.data[0]);
                    accumulate(&mut grads, *raw, dr);
                }
            }
        }
        Ok(params)
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(acc) => acc.add_assign(&g),
        slot => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    fn params(shapes: &[(&str, usize, usize)], seed: u64) -> ModelParams {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut p = ModelParams::default();
        for &(n, r, c) in shapes {
            p.push(n, Tensor::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect()));
        }
        p
    }

    /// Fixed weighted sum of all entries of `out`.
    fn scalarize(g: &mut Graph, out: Var) -> Var {
        let t = g.value(out).clone();
        let ones = g.input(Tensor::from_vec(t.cols, 1, (0..t.cols).map(|c| 0.3 + 0.1 * c as f64).collect()));
        let zero = g.input(Tensor::zeros(1, 1));
        let col = g.linear(out, ones, zero).unwrap();
        let mix = Arc::new(RowMix { rows: vec![(0..t.rows).map(|i| (i, 1.0 + 0.05 * i as f64)).collect()] });
        g.row_mix(col, mix).unwrap()
    }

    fn check_fd(mut p: ModelParams, build: impl Fn(&mut Graph) -> Var) {
        let grads = {
            let mut g = Graph::new(&p);
            let out = build(&mut g);
            let out = scalarize(&mut g, out);
            g.backward(out).unwrap()
        };
        let eval = |p: &ModelParams| {
            let mut g = Graph::inference(p);
            let out = build(&mut g);
            let out = scalarize(&mut g, out);
            g.value(out).data[0]
        };
        let eps = 1e-5;
        for t in 0..p.values.len() {
            for i in 0..p.values[t].len() {
                let orig = p.values[t].data[i];
                p.values[t].data[i] = orig + eps;
                let up = eval(&p);
                p.values[t].data[i] = orig - eps;
                let dn = eval(&p);
                p.values[t].data[i] = orig;
                let fd = (up - dn) / (2.0 * eps);
                let an = grads.tensors[t].data[i];
                assert!((fd - an).abs() <= 1e-6 * (1.0 + fd.abs()), "{}[{i}]: fd {fd} vs {an}", p.names[t]);
            }
        }
    }

    #[test]
    fn linear_gelu_layernorm_gradients() {
        let p = params(&[("x", 3, 4), ("w", 4, 5), ("b", 1, 5), ("g", 1, 5), ("c", 1, 5)], 1);
        check_fd(p, |g| {
            let x = g.param(ParamId(0));
            let w = g.param(ParamId(1));
            let b = g.param(ParamId(2));
            let y = g.linear(x, w, b).unwrap();
            let y = g.gelu(y);
            let (gg, cc) = (g.param(ParamId(3)), g.param(ParamId(4)));
            g.layer_norm(y, gg, cc).unwrap()
        });
    }

    #[test]
    fn batch_norm_and_mask_gradients() {
        let p = params(&[("x", 5, 3), ("g", 1, 3), ("b", 1, 3)], 2);
        let mask = Arc::new(vec![true, false, true, true, false]);
        check_fd(p, move |g| {
            let x = g.param(ParamId(0));
            let (gg, bb) = (g.param(ParamId(1)), g.param(ParamId(2)));
            let y = g.masked_batch_norm(x, gg, bb, mask.clone()).unwrap();
            let y = g.add(y, x).unwrap();
            g.mask_rows(y, Arc::new(vec![true, true, false, true, true])).unwrap()
        });
    }

    #[test]
    fn attention_gradients() {
        let p = params(&[("q", 3, 4), ("k", 4, 4), ("v", 4, 4)], 3);
        let pattern = Arc::new(Pattern { keys: vec![vec![0], vec![0, 1, 3], vec![]] });
        check_fd(p, move |g| {
            let (q, k, v) = (g.param(ParamId(0)), g.param(ParamId(1)), g.param(ParamId(2)));
            g.attention(q, k, v, 2, pattern.clone()).unwrap()
        });
    }

    #[test]
    fn attention_degenerate_cases() {
        let p = params(&[("q", 2, 4), ("k", 3, 4), ("v", 3, 4)], 4);
        let mut g = Graph::inference(&p);
        let (q, k, v) = (g.param(ParamId(0)), g.param(ParamId(1)), g.param(ParamId(2)));
        let out = g.attention(q, k, v, 2, Arc::new(Pattern { keys: vec![vec![2], vec![]] })).unwrap();
        // A single key gets all the weight, an empty key set yields zeros.
        assert_eq!(g.value(out).row(0), p.values[2].row(2));
        assert!(g.value(out).row(1).iter().all(|&x| x == 0.0));
        assert_eq!(g.attention_weights(out, 0, 1).unwrap(), &[1.0]);
        assert!(g.attention(q, k, v, 3, Arc::new(Pattern { keys: vec![vec![], vec![]] })).is_err());
    }

    #[test]
    fn backward_requires_recording() {
        let p = params(&[("x", 1, 1)], 5);
        let mut g = Graph::inference(&p);
        let x = g.param(ParamId(0));
        assert!(matches!(g.backward(x), Err(ModelError::GraphNotRecorded)));
        let mut g = Graph::new(&p);
        let x = g.param(ParamId(0));
        assert_eq!(g.backward(x).unwrap().tensors[0].data, vec![1.0]);
        assert!(matches!(g.backward(Var(99)), Err(ModelError::GraphNotRecorded)));
    }

    #[test]
    fn constant_output_has_zero_gradients() {
        let p = params(&[("w", 2, 2)], 6);
        let mut g = Graph::new(&p);
        let _w = g.param(ParamId(0));
        let c = g.input(Tensor::scalar(3.0));
        let grads = g.backward(c).unwrap();
        assert_eq!(grads.max_abs(), 0.0);
    }
}
