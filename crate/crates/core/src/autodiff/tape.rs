//! Reverse-mode tape. Every op records its inputs; `backward` walks the tape
//! once in reverse and accumulates gradients.

use std::rc::Rc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Lower/upper clamp applied to probabilities inside [`Tape::bce_loss`].
pub const PROB_CLAMP: f64 = 1e-7;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Constant sparse matrix in CSR form, used for graph propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    fn mul_dense(&self, x: &[f64], width: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * width];
        for r in 0..self.rows {
            let dst = &mut out[r * width..(r + 1) * width];
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                let c = self.col_indices[k];
                let v = self.values[k];
                for (o, s) in dst.iter_mut().zip(&x[c * width..(c + 1) * width]) {
                    *o += v * s;
                }
            }
        }
        out
    }

    fn mul_transpose_dense(&self, g: &[f64], width: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.cols * width];
        for r in 0..self.rows {
            let src = &g[r * width..(r + 1) * width];
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                let c = self.col_indices[k];
                let v = self.values[k];
                for (o, s) in out[c * width..(c + 1) * width].iter_mut().zip(src) {
                    *o += v * s;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Affine(Var, Var, Var),
    SpMM(Rc<SparseMatrix>, Var),
    Gather(Var, Rc<Vec<usize>>),
    Concat(Vec<Var>),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    ScaleRows(Var, Rc<Vec<f64>>),
    MulRows(Var, Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    Mask(Var, Rc<Vec<f64>>),
    SegmentSoftmax(Var, Rc<Vec<usize>>),
    SegmentWeightedSum {
        values: Var,
        weights: Var,
        segments: Rc<Vec<usize>>,
    },
    Mean(Var),
    Bce(Var, Rc<Vec<f64>>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Records one forward pass. Dropout is active only when a seeded RNG is set.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    dropout_rng: Option<ChaCha8Rng>,
}

fn check_segments(op: &'static str, segments: &[usize], m: usize, num: Option<usize>) -> Result<()> {
    if segments.len() != m {
        return Err(Error::shape(op, format!("{} segment ids for {m} rows", segments.len())));
    }
    if segments.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument(format!("{op}: segment ids must be non-decreasing")));
    }
    if let (Some(n), Some(&last)) = (num, segments.last()) {
        if last >= n {
            return Err(Error::shape(op, format!("segment id {last} >= segment count {n}")));
        }
    }
    Ok(())
}

/// Half-open row ranges `[start, end)` of consecutive equal segment ids.
fn segment_runs(segments: &[usize]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..=segments.len() {
        if i == segments.len() || segments[i] != segments[start] {
            runs.push((start, i));
            start = i;
        }
    }
    runs
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// A tape whose dropout masks are drawn from `rng`.
    pub fn with_dropout(rng: ChaCha8Rng) -> Self {
        Self {
            dropout_rng: Some(rng),
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let needs_grad = match op {
            Op::Param(_) => true,
            Op::Leaf => false,
            _ => inputs.iter().any(|v| self.nodes[v.0].needs_grad),
        };
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a constant.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, &[])
    }

    /// Records a trainable parameter; its gradient flows back to the store.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let mut t = store.tensor(id).clone();
        t.grad = None;
        self.push(t, Op::Param(id), &[])
    }

    pub fn matmul(&mut self, x: Var, w: Var) -> Result<Var> {
        let (xv, wv) = (self.value(x), self.value(w));
        let (n, d, d2) = (xv.rows(), xv.cols(), wv.cols());
        if wv.rows() != d {
            return Err(Error::shape(
                "matmul",
                format!("{:?} x {:?}", xv.shape(), wv.shape()),
            ));
        }
        let out = matmul_raw(xv.values(), wv.values(), n, d, d2);
        Ok(self.push(Tensor::matrix(n, d2, out)?, Op::MatMul(x, w), &[x, w]))
    }

    /// `x W + b` with `b` broadcast over rows.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        let (n, d, d2) = (xv.rows(), xv.cols(), wv.cols());
        if wv.rows() != d || bv.len() != d2 {
            return Err(Error::shape(
                "affine",
                format!("x {:?}, W {:?}, b {:?}", xv.shape(), wv.shape(), bv.shape()),
            ));
        }
        let mut out = matmul_raw(xv.values(), wv.values(), n, d, d2);
        for r in 0..n {
            for (o, bias) in out[r * d2..(r + 1) * d2].iter_mut().zip(bv.values()) {
                *o += bias;
            }
        }
        Ok(self.push(Tensor::matrix(n, d2, out)?, Op::Affine(x, w, b), &[x, w, b]))
    }

    /// Constant sparse matrix times `x`.
    pub fn spmm(&mut self, s: Rc<SparseMatrix>, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if s.cols != xv.rows() {
            return Err(Error::shape(
                "spmm",
                format!("sparse {}x{} times {:?}", s.rows, s.cols, xv.shape()),
            ));
        }
        let width = xv.cols();
        let out = s.mul_dense(xv.values(), width);
        let rows = s.rows;
        Ok(self.push(Tensor::matrix(rows, width, out)?, Op::SpMM(s, x), &[x]))
    }

    /// Selects rows of `x`; indices may repeat.
    pub fn gather_rows(&mut self, x: Var, idx: Rc<Vec<usize>>) -> Result<Var> {
        let xv = self.value(x);
        let (n, d) = (xv.rows(), xv.cols());
        let mut out = Vec::with_capacity(idx.len() * d);
        for &i in idx.iter() {
            if i >= n {
                return Err(Error::shape("gather_rows", format!("row {i} of {n}")));
            }
            out.extend_from_slice(xv.row(i));
        }
        let t = Tensor::matrix(idx.len(), d, out)?;
        Ok(self.push(t, Op::Gather(x, idx), &[x]))
    }

    /// Column-wise concatenation.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::shape("concat", "no inputs"))?;
        let n = self.value(first).rows();
        if parts.iter().any(|&p| self.value(p).rows() != n) {
            return Err(Error::shape("concat", "row counts differ"));
        }
        let widths: Vec<usize> = parts.iter().map(|&p| self.value(p).cols()).collect();
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(n * total);
        for r in 0..n {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        Ok(self.push(Tensor::matrix(n, total, out)?, Op::Concat(parts.to_vec()), parts))
    }

    fn same_shape(&self, op: &'static str, x: Var, y: Var) -> Result<()> {
        let (xv, yv) = (self.value(x), self.value(y));
        if xv.rows() != yv.rows() || xv.cols() != yv.cols() {
            return Err(Error::shape(op, format!("{:?} vs {:?}", xv.shape(), yv.shape())));
        }
        Ok(())
    }

    fn map_binary(&mut self, op: Op, x: Var, y: Var, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        let (xv, yv) = (self.value(x), self.value(y));
        let out = xv.values().iter().zip(yv.values()).map(|(&p, &q)| f(p, q)).collect();
        let t = Tensor::matrix(xv.rows(), xv.cols(), out)?;
        Ok(self.push(t, op, &[x, y]))
    }

    fn map_unary(&mut self, op: Op, x: Var, f: impl Fn(f64) -> f64) -> Var {
        let xv = self.value(x);
        let out = xv.values().iter().map(|&p| f(p)).collect();
        let t = Tensor::matrix(xv.rows(), xv.cols(), out).expect("same shape");
        self.push(t, op, &[x])
    }

    pub fn add(&mut self, x: Var, y: Var) -> Result<Var> {
        self.same_shape("add", x, y)?;
        self.map_binary(Op::Add(x, y), x, y, |p, q| p + q)
    }

    /// Element-wise product.
    pub fn mul(&mut self, x: Var, y: Var) -> Result<Var> {
        self.same_shape("mul", x, y)?;
        self.map_binary(Op::Mul(x, y), x, y, |p, q| p * q)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.map_unary(Op::Scale(x, c), x, |p| c * p)
    }

    /// Multiplies row `i` of `x` by the constant `factors[i]`.
    pub fn scale_rows(&mut self, x: Var, factors: Rc<Vec<f64>>) -> Result<Var> {
        let xv = self.value(x);
        if factors.len() != xv.rows() {
            return Err(Error::shape("scale_rows", format!("{} factors for {} rows", factors.len(), xv.rows())));
        }
        let d = xv.cols();
        let out = xv.values().iter().enumerate().map(|(k, &p)| p * factors[k / d.max(1)]).collect();
        let t = Tensor::matrix(xv.rows(), d, out)?;
        Ok(self.push(t, Op::ScaleRows(x, factors), &[x]))
    }

    /// Multiplies row `i` of `x` by `w[i]`, where `w` is a column.
    pub fn mul_rows(&mut self, x: Var, w: Var) -> Result<Var> {
        let (xv, wv) = (self.value(x), self.value(w));
        if wv.cols() != 1 || wv.rows() != xv.rows() {
            return Err(Error::shape("mul_rows", format!("{:?} by {:?}", xv.shape(), wv.shape())));
        }
        let d = xv.cols();
        let out = xv.values().iter().enumerate().map(|(k, &p)| p * wv.values()[k / d.max(1)]).collect();
        let t = Tensor::matrix(xv.rows(), d, out)?;
        Ok(self.push(t, Op::MulRows(x, w), &[x, w]))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.map_unary(Op::Relu(x), x, |p| p.max(0.0))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        self.map_unary(Op::LeakyRelu(x, slope), x, move |p| if p > 0.0 { p } else { slope * p })
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.map_unary(Op::Sigmoid(x), x, sigmoid)
    }

    /// Inverted dropout with rate `p`. Identity when the tape has no RNG.
    pub fn dropout(&mut self, x: Var, p: f64) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("dropout rate {p} outside [0,1)")));
        }
        let Some(rng) = self.dropout_rng.as_mut() else {
            return Ok(x);
        };
        if p == 0.0 {
            return Ok(x);
        }
        let n = self.nodes[x.0].value.len();
        let keep = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..n).map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep }).collect();
        let xv = self.value(x);
        let out = xv.values().iter().zip(&mask).map(|(a, m)| a * m).collect();
        let t = Tensor::matrix(xv.rows(), xv.cols(), out)?;
        Ok(self.push(t, Op::Mask(x, Rc::new(mask)), &[x]))
    }

    /// Softmax over each run of equal segment ids of a column of logits.
    pub fn segment_softmax(&mut self, logits: Var, segments: Rc<Vec<usize>>) -> Result<Var> {
        let lv = self.value(logits);
        if lv.cols() != 1 {
            return Err(Error::shape("segment_softmax", format!("logits {:?} must be a column", lv.shape())));
        }
        check_segments("segment_softmax", &segments, lv.rows(), None)?;
        let x = lv.values();
        let mut out = vec![0.0; x.len()];
        for (s, e) in segment_runs(&segments) {
            let max = x[s..e].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for i in s..e {
                out[i] = (x[i] - max).exp();
                total += out[i];
            }
            out[s..e].iter_mut().for_each(|o| *o /= total);
        }
        let t = Tensor::column(out);
        Ok(self.push(t, Op::SegmentSoftmax(logits, segments), &[logits]))
    }

    /// `out[s] = sum_{i in segment s} weights[i] * values[i]`; empty segments
    /// produce zero rows.
    pub fn segment_weighted_sum(
        &mut self,
        values: Var,
        weights: Var,
        segments: Rc<Vec<usize>>,
        num_segments: usize,
    ) -> Result<Var> {
        let (vv, wv) = (self.value(values), self.value(weights));
        if wv.cols() != 1 || wv.rows() != vv.rows() {
            return Err(Error::shape(
                "segment_weighted_sum",
                format!("values {:?}, weights {:?}", vv.shape(), wv.shape()),
            ));
        }
        check_segments("segment_weighted_sum", &segments, vv.rows(), Some(num_segments))?;
        let d = vv.cols();
        let mut out = vec![0.0; num_segments * d];
        for (i, &s) in segments.iter().enumerate() {
            let w = wv.values()[i];
            for (o, x) in out[s * d..(s + 1) * d].iter_mut().zip(vv.row(i)) {
                *o += w * x;
            }
        }
        let t = Tensor::matrix(num_segments, d, out)?;
        Ok(self.push(
            t,
            Op::SegmentWeightedSum {
                values,
                weights,
                segments,
            },
            &[values, weights],
        ))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let m = xv.values().iter().sum::<f64>() / xv.len().max(1) as f64;
        self.push(Tensor::scalar(m), Op::Mean(x), &[x])
    }

    /// Mean binary cross-entropy of probabilities against 0/1 labels.
    pub fn bce_loss(&mut self, p: Var, labels: &[f64]) -> Result<Var> {
        let pv = self.value(p);
        if pv.len() != labels.len() || labels.is_empty() {
            return Err(Error::shape("bce_loss", format!("{} probabilities, {} labels", pv.len(), labels.len())));
        }
        if let Some(y) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
            return Err(Error::InvalidArgument(format!("label {y} is not 0 or 1")));
        }
        let loss = pv
            .values()
            .iter()
            .zip(labels)
            .map(|(&q, &y)| {
                let q = q.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                -(y * q.ln() + (1.0 - y) * (1.0 - q).ln())
            })
            .sum::<f64>()
            / labels.len() as f64;
        Ok(self.push(Tensor::scalar(loss), Op::Bce(p, Rc::new(labels.to_vec())), &[p]))
    }

    /// Back-propagates from a scalar output.
    pub fn backward(&mut self, out: Var) -> Result<()> {
        if self.value(out).len() != 1 {
            return Err(Error::shape("backward", "output must be a scalar"));
        }
        self.grads = vec![None; self.nodes.len()];
        self.grads[out.0] = Some(vec![1.0]);
        for i in (0..=out.0).rev() {
            let Some(g) = self.grads[i].take() else {
                continue;
            };
            if self.nodes[i].needs_grad {
                self.propagate(i, &g);
            }
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    /// Gradient of the last `backward` output with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Adds parameter gradients from the last `backward` into the store.
    pub fn accumulate_grads(&self, store: &mut ParamStore) {
        for (i, node) in self.nodes.iter().enumerate() {
            if let (Op::Param(id), Some(Some(g))) = (&node.op, self.grads.get(i)) {
                store.add_grad(*id, g);
            }
        }
    }

    fn acc(&mut self, v: Var, delta: Vec<f64>) {
        if !self.nodes[v.0].needs_grad {
            return;
        }
        match &mut self.grads[v.0] {
            Some(g) => g.iter_mut().zip(&delta).for_each(|(a, d)| *a += d),
            slot => *slot = Some(delta),
        }
    }

    fn propagate(&mut self, i: usize, g: &[f64]) {
        let op = self.nodes[i].op.clone();
        match op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(x, w) => {
                let (dx, dw) = self.matmul_grads(x, w, g);
                self.acc(x, dx);
                self.acc(w, dw);
            }
            Op::Affine(x, w, b) => {
                let (dx, dw) = self.matmul_grads(x, w, g);
                let d2 = self.value(w).cols();
                let mut db = vec![0.0; d2];
                for row in g.chunks(d2) {
                    db.iter_mut().zip(row).for_each(|(a, r)| *a += r);
                }
                self.acc(x, dx);
                self.acc(w, dw);
                self.acc(b, db);
            }
            Op::SpMM(s, x) => {
                let width = self.value(x).cols();
                let dx = s.mul_transpose_dense(g, width);
                self.acc(x, dx);
            }
            Op::Gather(x, idx) => {
                let xv = self.value(x);
                let d = xv.cols();
                let mut dx = vec![0.0; xv.len()];
                for (k, &r) in idx.iter().enumerate() {
                    dx[r * d..(r + 1) * d]
                        .iter_mut()
                        .zip(&g[k * d..(k + 1) * d])
                        .for_each(|(a, b)| *a += b);
                }
                self.acc(x, dx);
            }
            Op::Concat(parts) => {
                let total: usize = self.nodes[i].value.cols();
                let n = self.nodes[i].value.rows();
                let mut offset = 0;
                for p in parts {
                    let w = self.value(p).cols();
                    let mut dp = Vec::with_capacity(n * w);
                    for r in 0..n {
                        dp.extend_from_slice(&g[r * total + offset..r * total + offset + w]);
                    }
                    offset += w;
                    self.acc(p, dp);
                }
            }
            Op::Add(x, y) => {
                self.acc(x, g.to_vec());
                self.acc(y, g.to_vec());
            }
            Op::Mul(x, y) => {
                let dx = g.iter().zip(self.value(y).values()).map(|(a, b)| a * b).collect();
                let dy = g.iter().zip(self.value(x).values()).map(|(a, b)| a * b).collect();
                self.acc(x, dx);
                self.acc(y, dy);
            }
            Op::Scale(x, c) => self.acc(x, g.iter().map(|a| a * c).collect()),
            Op::ScaleRows(x, f) => {
                let d = self.value(x).cols().max(1);
                let dx = g.iter().enumerate().map(|(k, a)| a * f[k / d]).collect();
                self.acc(x, dx);
            }
            Op::MulRows(x, w) => {
                let d = self.value(x).cols();
                let (xv, wv) = (self.value(x).values(), self.value(w).values());
                let dx = g.iter().enumerate().map(|(k, a)| a * wv[k / d.max(1)]).collect();
                let dw = (0..wv.len())
                    .map(|r| (0..d).map(|c| g[r * d + c] * xv[r * d + c]).sum())
                    .collect();
                self.acc(x, dx);
                self.acc(w, dw);
            }
            Op::Relu(x) => {
                let dx = g
                    .iter()
                    .zip(self.value(x).values())
                    .map(|(a, &p)| if p > 0.0 { *a } else { 0.0 })
                    .collect();
                self.acc(x, dx);
            }
            Op::LeakyRelu(x, slope) => {
                let dx = g
                    .iter()
                    .zip(self.value(x).values())
                    .map(|(a, &p)| if p > 0.0 { *a } else { slope * a })
                    .collect();
                self.acc(x, dx);
            }
            Op::Sigmoid(x) => {
                let dx = g
                    .iter()
                    .zip(self.nodes[i].value.values())
                    .map(|(a, &s)| a * s * (1.0 - s))
                    .collect();
                self.acc(x, dx);
            }
            Op::Mask(x, mask) => self.acc(x, g.iter().zip(mask.iter()).map(|(a, m)| a * m).collect()),
            Op::SegmentSoftmax(x, segments) => {
                let y = self.nodes[i].value.values();
                let mut dx = vec![0.0; y.len()];
                for (s, e) in segment_runs(&segments) {
                    let dot: f64 = (s..e).map(|k| y[k] * g[k]).sum();
                    for k in s..e {
                        dx[k] = y[k] * (g[k] - dot);
                    }
                }
                self.acc(x, dx);
            }
            Op::SegmentWeightedSum {
                values,
                weights,
                segments,
            } => {
                let vv = self.value(values);
                let d = vv.cols();
                let wv = self.value(weights).values();
                let mut dv = vec![0.0; vv.len()];
                let mut dw = vec![0.0; wv.len()];
                for (k, &s) in segments.iter().enumerate() {
                    let gs = &g[s * d..(s + 1) * d];
                    for c in 0..d {
                        dv[k * d + c] = wv[k] * gs[c];
                    }
                    dw[k] = vv.row(k).iter().zip(gs).map(|(a, b)| a * b).sum();
                }
                self.acc(values, dv);
                self.acc(weights, dw);
            }
            Op::Mean(x) => {
                let n = self.value(x).len().max(1);
                self.acc(x, vec![g[0] / n as f64; n]);
            }
            Op::Bce(p, labels) => {
                let n = labels.len() as f64;
                let dp = self
                    .value(p)
                    .values()
                    .iter()
                    .zip(labels.iter())
                    .map(|(&q, &y)| {
                        if !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&q) {
                            0.0
                        } else {
                            g[0] * (-(y / q) + (1.0 - y) / (1.0 - q)) / n
                        }
                    })
                    .collect();
                self.acc(p, dp);
            }
        }
    }

    fn matmul_grads(&self, x: Var, w: Var, g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (xv, wv) = (self.value(x), self.value(w));
        let (n, d, d2) = (xv.rows(), xv.cols(), wv.cols());
        let (xs, ws) = (xv.values(), wv.values());
        // dx = g W^T, dw = x^T g
        let mut dx = vec![0.0; n * d];
        let mut dw = vec![0.0; d * d2];
        for r in 0..n {
            let gr = &g[r * d2..(r + 1) * d2];
            for k in 0..d {
                let wk = &ws[k * d2..(k + 1) * d2];
                dx[r * d + k] = gr.iter().zip(wk).map(|(a, b)| a * b).sum();
                let xrk = xs[r * d + k];
                if xrk != 0.0 {
                    dw[k * d2..(k + 1) * d2]
                        .iter_mut()
                        .zip(gr)
                        .for_each(|(a, b)| *a += xrk * b);
                }
            }
        }
        (dx, dw)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn matmul_raw(x: &[f64], w: &[f64], n: usize, d: usize, d2: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * d2];
    for r in 0..n {
        let dst = &mut out[r * d2..(r + 1) * d2];
        for k in 0..d {
            let xrk = x[r * d + k];
            if xrk != 0.0 {
                dst.iter_mut()
                    .zip(&w[k * d2..(k + 1) * d2])
                    .for_each(|(o, b)| *o += xrk * b);
            }
        }
    }
    out
}
