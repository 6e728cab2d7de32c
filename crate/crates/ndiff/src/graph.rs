//! Tape-based reverse-mode differentiation.
//!
//! Every operation appends a node to the tape holding its forward value and
//! whatever it needs for the backward sweep. `backward` walks the tape in
//! reverse once, accumulating gradients into every node that requires them.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{NdError, Result};
use crate::tensor::{gemm, gemm_nt, gemm_tn, matmul, Tensor};

static NEXT_TAPE: AtomicU64 = AtomicU64::new(1);

/// Handle to a node on a particular tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    idx: usize,
    tape: u64,
}

enum Op {
    Leaf,
    MatMul(usize, usize),
    AddBias(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    Relu(usize),
    LeakyRelu(usize, f64),
    Sigmoid(usize),
    Tanh(usize),
    Sqrt(usize),
    Softmax(usize),
    Transpose(usize),
    SliceCols { x: usize, start: usize },
    ConcatCols(Vec<usize>),
    SumCols(usize),
    Sum(usize),
    Mean(usize),
    BatchNorm {
        x: usize,
        gamma: usize,
        beta: usize,
        xhat: Tensor,
        inv_std: Vec<f64>,
    },
    Conv1d {
        x: usize,
        kernel: usize,
        bias: usize,
        cols: Vec<f64>,
    },
    MaxPool1d { x: usize, argmax: Vec<usize> },
    TimeStep { x: usize, t: usize },
    StackTime(Vec<usize>),
    Reshape(usize),
    SoftmaxXent {
        logits: usize,
        probs: Tensor,
        targets: Tensor,
        weights: Vec<f64>,
        denom: f64,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Weights and biases of one LSTM cell, gate blocks ordered input, forget,
/// output, candidate along the columns.
#[derive(Clone, Copy, Debug)]
pub struct LstmParams {
    /// `(H + C_in) × 4H`, rows ordered `[h_prev, x_t]`.
    pub weights: Var,
    /// `4H`
    pub bias: Var,
}

pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
    tape: u64,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            grads: Vec::new(),
            tape: NEXT_TAPE.fetch_add(1, Ordering::Relaxed),
        }
    }

    /// Drops every recorded node. Handles from before the reset become invalid.
    pub fn reset(&mut self) {
        self.nodes.clear();
        self.grads.clear();
        self.tape = NEXT_TAPE.fetch_add(1, Ordering::Relaxed);
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            idx: self.nodes.len() - 1,
            tape: self.tape,
        }
    }

    fn check(&self, v: Var) -> Result<usize> {
        if v.tape != self.tape || v.idx >= self.nodes.len() {
            return Err(NdError::State(
                "variable was not recorded on this tape".into(),
            ));
        }
        Ok(v.idx)
    }

    fn rg(&self, i: usize) -> bool {
        self.nodes[i].requires_grad
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// Trainable leaf.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.idx].value
    }

    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.idx).and_then(Option::as_ref)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.check(a)?, self.check(b)?);
        let out = matmul(&self.nodes[ia].value, &self.nodes[ib].value)?;
        let rg = self.rg(ia) || self.rg(ib);
        Ok(self.push(out, Op::MatMul(ia, ib), rg))
    }

    /// Adds a bias vector along the last axis.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (ix, ib) = (self.check(x)?, self.check(b)?);
        let xv = &self.nodes[ix].value;
        let bv = &self.nodes[ib].value;
        let p = xv.last_dim();
        if bv.len() != p {
            return Err(NdError::Shape(format!(
                "bias of length {} for last axis {}",
                bv.len(),
                p
            )));
        }
        let mut out = xv.clone();
        for chunk in out.data_mut().chunks_mut(p) {
            for (o, b) in chunk.iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        let rg = self.rg(ix) || self.rg(ib);
        Ok(self.push(out, Op::AddBias(ix, ib), rg))
    }

    /// Affine part of a dense layer, `x · w + b`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xw = self.matmul(x, w)?;
        self.add_bias(xw, b)
    }

    fn same_shape(&self, ia: usize, ib: usize, what: &str) -> Result<()> {
        if self.nodes[ia].value.shape() != self.nodes[ib].value.shape() {
            return Err(NdError::Shape(format!(
                "{what}: {:?} vs {:?}",
                self.nodes[ia].value.shape(),
                self.nodes[ib].value.shape()
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.check(a)?, self.check(b)?);
        self.same_shape(ia, ib, "add")?;
        let out = self.nodes[ia].value.zip_map(&self.nodes[ib].value, |x, y| x + y);
        let rg = self.rg(ia) || self.rg(ib);
        Ok(self.push(out, Op::Add(ia, ib), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.check(a)?, self.check(b)?);
        self.same_shape(ia, ib, "sub")?;
        let out = self.nodes[ia].value.zip_map(&self.nodes[ib].value, |x, y| x - y);
        let rg = self.rg(ia) || self.rg(ib);
        Ok(self.push(out, Op::Sub(ia, ib), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.check(a)?, self.check(b)?);
        self.same_shape(ia, ib, "mul")?;
        let out = self.nodes[ia].value.zip_map(&self.nodes[ib].value, |x, y| x * y);
        let rg = self.rg(ia) || self.rg(ib);
        Ok(self.push(out, Op::Mul(ia, ib), rg))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Result<Var> {
        let ix = self.check(x)?;
        let out = self.nodes[ix].value.map(|v| v * s);
        let rg = self.rg(ix);
        Ok(self.push(out, Op::Scale(ix, s), rg))
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Result<Var> {
        let ix = self.check(x)?;
        let out = self.nodes[ix].value.map(|v| v + c);
        let rg = self.rg(ix);
        Ok(self.push(out, Op::AddScalar(ix), rg))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let ix = self.check(x)?;
        let out = self.nodes[ix].value.map(|v| v.max(0.0));
        let rg = self.rg(ix);
        Ok(self.push(out, Op::Relu(ix), rg))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Result<Var> {
        let ix = self.check(x)?;
        let out = self.nodes[ix].value.map(|v| if v > 0.0 { v } else { slope * v });
        let rg = self.rg(ix);
        Ok(self.push(out, Op::LeakyRelu(ix, slope), rg))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let ix = self.check(x)?;
        let out = self.nodes[ix].value.map(sigmoid);
        let rg = self.rg(ix);
        Ok(self.push(out, Op::Sigmoid(ix), rg))
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        let ix = self.check(x)?;
        let out = self.nodes[ix].value.map(f64::tanh);
        let rg = self.rg(ix);
        Ok(self.push(out, Op::Tanh(ix), rg))
    }

    pub fn sqrt(&mut self, x: Var) -> Result<Var> {
        let ix = self.check(x)?;
        if self.nodes[ix].value.data().iter().any(|&v| v < 0.0) {
            return Err(NdError::Input("sqrt of a negative value".into()));
        }
        let out = self.nodes[ix].value.map(f64::sqrt);
        let rg = self.rg(ix);
        Ok(self.push(out, Op::Sqrt(ix), rg))
    }

    /// Softmax along the last axis.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let ix = self.check(x)?;
        let xv = &self.nodes[ix].value;
        let mut out = xv.clone();
        let c = xv.last_dim();
        for row in out.data_mut().chunks_mut(c) {
            softmax_in_place(row);
        }
        let rg = self.rg(ix);
        Ok(self.push(out, Op::Softmax(ix), rg))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let ix = self.check(x)?;
        if self.nodes[ix].value.ndim() != 2 {
            return Err(NdError::Shape("transpose needs a 2-D tensor".into()));
        }
        let out = self.nodes[ix].value.transpose2();
        let rg = self.rg(ix);
        Ok(self.push(out, Op::Transpose(ix), rg))
    }

    /// Columns `start..start + len` of a 2-D tensor.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let ix = self.check(x)?;
        let xv = &self.nodes[ix].value;
        if xv.ndim() != 2 || start + len > xv.shape()[1] {
            return Err(NdError::Shape(format!(
                "slice {start}..{} of {:?}",
                start + len,
                xv.shape()
            )));
        }
        let n = xv.shape()[0];
        let mut data = Vec::with_capacity(n * len);
        for r in 0..n {
            data.extend_from_slice(&xv.row(r)[start..start + len]);
        }
        let out = Tensor::new(vec![n, len], data)?;
        let rg = self.rg(ix);
        Ok(self.push(out, Op::SliceCols { x: ix, start }, rg))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let idx = parts
            .iter()
            .map(|&v| self.check(v))
            .collect::<Result<Vec<_>>>()?;
        let n = match idx.first() {
            Some(&i) => self.nodes[i].value.rows(),
            None => return Err(NdError::Shape("concat of nothing".into())),
        };
        let mut width = 0;
        for &i in &idx {
            let v = &self.nodes[i].value;
            if v.ndim() != 2 || v.rows() != n {
                return Err(NdError::Shape(format!("concat part {:?}", v.shape())));
            }
            width += v.shape()[1];
        }
        let mut data = Vec::with_capacity(n * width);
        for r in 0..n {
            for &i in &idx {
                data.extend_from_slice(self.nodes[i].value.row(r));
            }
        }
        let out = Tensor::new(vec![n, width], data)?;
        let rg = idx.iter().any(|&i| self.rg(i));
        Ok(self.push(out, Op::ConcatCols(idx), rg))
    }

    /// Row sums of a 2-D tensor as an `N × 1` column.
    pub fn sum_cols(&mut self, x: Var) -> Result<Var> {
        let ix = self.check(x)?;
        let xv = &self.nodes[ix].value;
        if xv.ndim() != 2 {
            return Err(NdError::Shape("sum_cols needs a 2-D tensor".into()));
        }
        let n = xv.rows();
        let data: Vec<f64> = (0..n).map(|r| xv.row(r).iter().sum()).collect();
        let out = Tensor::new(vec![n, 1], data)?;
        let rg = self.rg(ix);
        Ok(self.push(out, Op::SumCols(ix), rg))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let ix = self.check(x)?;
        let out = Tensor::scalar(self.nodes[ix].value.sum());
        let rg = self.rg(ix);
        Ok(self.push(out, Op::Sum(ix), rg))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let ix = self.check(x)?;
        let v = &self.nodes[ix].value;
        if v.is_empty() {
            return Err(NdError::Shape("mean of an empty tensor".into()));
        }
        let out = Tensor::scalar(v.sum() / v.len() as f64);
        let rg = self.rg(ix);
        Ok(self.push(out, Op::Mean(ix), rg))
    }

    /// Training-mode batch normalization over the rows of a 2-D tensor.
    pub fn batch_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let (ix, ig, ib) = (self.check(x)?, self.check(gamma)?, self.check(beta)?);
        let xv = &self.nodes[ix].value;
        if xv.ndim() != 2 {
            return Err(NdError::Shape("batch norm needs a 2-D tensor".into()));
        }
        let (n, c) = (xv.shape()[0], xv.shape()[1]);
        if n < 2 {
            return Err(NdError::DegenerateBatch(format!(
                "training-mode batch norm needs at least 2 rows, got {n}"
            )));
        }
        let (gv, bv) = (&self.nodes[ig].value, &self.nodes[ib].value);
        if gv.len() != c || bv.len() != c {
            return Err(NdError::Shape("batch norm scale/shift width".into()));
        }
        let (mean, var) = xv.column_moments();
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let mut xhat = xv.clone();
        let mut out = xv.clone();
        for r in 0..n {
            for j in 0..c {
                let h = (xv.data()[r * c + j] - mean[j]) * inv_std[j];
                xhat.data_mut()[r * c + j] = h;
                out.data_mut()[r * c + j] = h * gv.data()[j] + bv.data()[j];
            }
        }
        let rg = self.rg(ix) || self.rg(ig) || self.rg(ib);
        Ok(self.push(
            out,
            Op::BatchNorm {
                x: ix,
                gamma: ig,
                beta: ib,
                xhat,
                inv_std,
            },
            rg,
        ))
    }

    /// Valid 1-D convolution. `x` is `N × T × C`, `kernel` is `F × K × C`,
    /// `bias` is `F`; the result is `N × (T − K + 1) × F`.
    pub fn conv1d(&mut self, x: Var, kernel: Var, bias: Var) -> Result<Var> {
        let (ix, ik, ib) = (self.check(x)?, self.check(kernel)?, self.check(bias)?);
        let xv = &self.nodes[ix].value;
        let kv = &self.nodes[ik].value;
        let bv = &self.nodes[ib].value;
        if xv.ndim() != 3 || kv.ndim() != 3 || kv.shape()[2] != xv.shape()[2] {
            return Err(NdError::Shape(format!(
                "conv1d input {:?} kernel {:?}",
                xv.shape(),
                kv.shape()
            )));
        }
        let (n, t, c) = (xv.shape()[0], xv.shape()[1], xv.shape()[2]);
        let (f, k) = (kv.shape()[0], kv.shape()[1]);
        if t < k {
            return Err(NdError::Shape(format!(
                "sequence length {t} shorter than kernel {k}"
            )));
        }
        if bv.len() != f {
            return Err(NdError::Shape("conv1d bias width".into()));
        }
        let tout = t - k + 1;
        let kc = k * c;
        let mut cols = vec![0.0; n * tout * kc];
        for b in 0..n {
            for s in 0..tout {
                let src = &xv.data()[(b * t + s) * c..(b * t + s + k) * c];
                cols[(b * tout + s) * kc..(b * tout + s + 1) * kc].copy_from_slice(src);
            }
        }
        let mut out = vec![0.0; n * tout * f];
        gemm_nt(n * tout, kc, f, &cols, kv.data(), &mut out, false);
        for chunk in out.chunks_mut(f) {
            for (o, b) in chunk.iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        let out = Tensor::new(vec![n, tout, f], out)?;
        let rg = self.rg(ix) || self.rg(ik) || self.rg(ib);
        Ok(self.push(
            out,
            Op::Conv1d {
                x: ix,
                kernel: ik,
                bias: ib,
                cols,
            },
            rg,
        ))
    }

    /// Non-overlapping max pooling along the time axis of `N × T × C`.
    ///
    /// Output length is `T / pool` (floor); a sequence shorter than `pool`
    /// pools its single partial window. Ties go to the lowest index.
    pub fn maxpool1d(&mut self, x: Var, pool: usize) -> Result<Var> {
        let ix = self.check(x)?;
        let xv = &self.nodes[ix].value;
        if xv.ndim() != 3 || pool == 0 {
            return Err(NdError::Shape("maxpool1d needs N×T×C and pool ≥ 1".into()));
        }
        let (n, t, c) = (xv.shape()[0], xv.shape()[1], xv.shape()[2]);
        if t == 0 {
            return Err(NdError::Shape("maxpool1d over an empty sequence".into()));
        }
        let (tout, width) = if t < pool { (1, t) } else { (t / pool, pool) };
        let mut out = vec![0.0; n * tout * c];
        let mut argmax = vec![0; n * tout * c];
        for b in 0..n {
            for w in 0..tout {
                for ch in 0..c {
                    let mut best = (b * t + w * pool) * c + ch;
                    for j in 1..width {
                        let cand = (b * t + w * pool + j) * c + ch;
                        if xv.data()[cand] > xv.data()[best] {
                            best = cand;
                        }
                    }
                    let o = (b * tout + w) * c + ch;
                    out[o] = xv.data()[best];
                    argmax[o] = best;
                }
            }
        }
        let out = Tensor::new(vec![n, tout, c], out)?;
        let rg = self.rg(ix);
        Ok(self.push(out, Op::MaxPool1d { x: ix, argmax }, rg))
    }

    /// Slice `x[:, t, :]` of an `N × T × C` tensor.
    pub fn time_step(&mut self, x: Var, t: usize) -> Result<Var> {
        let ix = self.check(x)?;
        let xv = &self.nodes[ix].value;
        if xv.ndim() != 3 || t >= xv.shape()[1] {
            return Err(NdError::Shape(format!("time step {t} of {:?}", xv.shape())));
        }
        let (n, tt, c) = (xv.shape()[0], xv.shape()[1], xv.shape()[2]);
        let mut data = Vec::with_capacity(n * c);
        for b in 0..n {
            data.extend_from_slice(&xv.data()[(b * tt + t) * c..(b * tt + t + 1) * c]);
        }
        let out = Tensor::new(vec![n, c], data)?;
        let rg = self.rg(ix);
        Ok(self.push(out, Op::TimeStep { x: ix, t }, rg))
    }

    /// Stacks `T` tensors of shape `N × H` into `N × T × H`.
    pub fn stack_time(&mut self, steps: &[Var]) -> Result<Var> {
        let idx = steps
            .iter()
            .map(|&v| self.check(v))
            .collect::<Result<Vec<_>>>()?;
        let first = match idx.first() {
            Some(&i) => self.nodes[i].value.shape().to_vec(),
            None => return Err(NdError::Shape("stack of nothing".into())),
        };
        if first.len() != 2 || idx.iter().any(|&i| self.nodes[i].value.shape() != first) {
            return Err(NdError::Shape("stack_time parts must share an N×H shape".into()));
        }
        let (n, h, t) = (first[0], first[1], idx.len());
        let mut data = vec![0.0; n * t * h];
        for (s, &i) in idx.iter().enumerate() {
            let v = &self.nodes[i].value;
            for b in 0..n {
                data[(b * t + s) * h..(b * t + s + 1) * h].copy_from_slice(v.row(b));
            }
        }
        let out = Tensor::new(vec![n, t, h], data)?;
        let rg = idx.iter().any(|&i| self.rg(i));
        Ok(self.push(out, Op::StackTime(idx), rg))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let ix = self.check(x)?;
        let out = self.nodes[ix].value.clone().reshape(shape)?;
        let rg = self.rg(ix);
        Ok(self.push(out, Op::Reshape(ix), rg))
    }

    /// Mean categorical cross-entropy of `softmax(logits)` against one-hot rows.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &Tensor) -> Result<Var> {
        let n = self.value(logits).rows();
        self.weighted_softmax_cross_entropy(logits, targets, &vec![1.0; n], n as f64)
    }

    /// `Σ_r w_r · CE_r / denom`. Rows with zero weight are not validated.
    pub fn weighted_softmax_cross_entropy(
        &mut self,
        logits: Var,
        targets: &Tensor,
        weights: &[f64],
        denom: f64,
    ) -> Result<Var> {
        let il = self.check(logits)?;
        let lv = &self.nodes[il].value;
        if lv.ndim() != 2 || lv.shape() != targets.shape() || weights.len() != lv.rows() {
            return Err(NdError::Shape(format!(
                "cross entropy logits {:?} targets {:?}",
                lv.shape(),
                targets.shape()
            )));
        }
        if denom <= 0.0 {
            return Err(NdError::Input("cross entropy normalizer must be positive".into()));
        }
        let c = lv.last_dim();
        let mut probs = lv.clone();
        let mut loss = 0.0;
        for r in 0..lv.rows() {
            let row = lv.row(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            let p = &mut probs.data_mut()[r * c..(r + 1) * c];
            for (pj, &z) in p.iter_mut().zip(row) {
                *pj = (z - lse).exp();
            }
            if weights[r] == 0.0 {
                continue;
            }
            let t = targets.row(r);
            let ones = t.iter().filter(|&&v| v == 1.0).count();
            let zeros = t.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || ones + zeros != c {
                return Err(NdError::Input(format!("target row {r} is not one-hot")));
            }
            let k = t.iter().position(|&v| v == 1.0).unwrap_or(0);
            loss += weights[r] * (lse - row[k]);
        }
        let out = Tensor::scalar(loss / denom);
        let rg = self.rg(il);
        Ok(self.push(
            out,
            Op::SoftmaxXent {
                logits: il,
                probs,
                targets: targets.clone(),
                weights: weights.to_vec(),
                denom,
            },
            rg,
        ))
    }

    /// One LSTM time step; returns `(h_t, c_t)`.
    pub fn lstm_step(
        &mut self,
        x_t: Var,
        h_prev: Var,
        c_prev: Var,
        p: &LstmParams,
    ) -> Result<(Var, Var)> {
        let h = self.value(h_prev).last_dim();
        if self.value(p.weights).ndim() != 2 || self.value(p.weights).shape()[1] != 4 * h {
            return Err(NdError::Shape(format!(
                "lstm weights {:?} for {h} units",
                self.value(p.weights).shape()
            )));
        }
        let joined = self.concat_cols(&[h_prev, x_t])?;
        let z = self.dense(joined, p.weights, p.bias)?;
        let zi = self.slice_cols(z, 0, h)?;
        let zf = self.slice_cols(z, h, h)?;
        let zo = self.slice_cols(z, 2 * h, h)?;
        let zc = self.slice_cols(z, 3 * h, h)?;
        let i = self.sigmoid(zi)?;
        let f = self.sigmoid(zf)?;
        let o = self.sigmoid(zo)?;
        let cand = self.tanh(zc)?;
        let keep = self.mul(f, c_prev)?;
        let write = self.mul(i, cand)?;
        let c = self.add(keep, write)?;
        let tc = self.tanh(c)?;
        let h_t = self.mul(o, tc)?;
        Ok((h_t, c))
    }

    /// Reverse sweep from a scalar node.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let il = self.check(loss)?;
        if self.nodes[il].value.len() != 1 {
            return Err(NdError::Shape(format!(
                "backward needs a scalar loss, got {:?}",
                self.nodes[il].value.shape()
            )));
        }
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        self.grads[il] = Some(Tensor::filled(self.nodes[il].value.shape(), 1.0));
        for i in (0..=il).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = self.grads[i].take() else {
                continue;
            };
            self.propagate(i, &g);
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    fn acc(&mut self, i: usize, t: Tensor) {
        if !self.nodes[i].requires_grad {
            return;
        }
        match &mut self.grads[i] {
            Some(g) => g.add_assign(&t),
            slot => *slot = Some(t),
        }
    }

    fn propagate(&mut self, i: usize, g: &Tensor) {
        let nodes = &self.nodes;
        let val = |j: usize| &nodes[j].value;
        let mut out: Vec<(usize, Tensor)> = Vec::with_capacity(3);
        match &nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
                if nodes[*a].requires_grad {
                    let mut da = vec![0.0; m * k];
                    gemm_nt(m, n, k, g.data(), bv.data(), &mut da, false);
                    out.push((*a, Tensor::new(vec![m, k], da).unwrap()));
                }
                if nodes[*b].requires_grad {
                    let mut db = vec![0.0; k * n];
                    gemm_tn(k, m, n, av.data(), g.data(), &mut db, false);
                    out.push((*b, Tensor::new(vec![k, n], db).unwrap()));
                }
            }
            Op::AddBias(x, b) => {
                out.push((*x, g.clone()));
                if nodes[*b].requires_grad {
                    let p = g.last_dim();
                    let mut db = vec![0.0; p];
                    for chunk in g.data().chunks(p) {
                        for (d, v) in db.iter_mut().zip(chunk) {
                            *d += v;
                        }
                    }
                    out.push((*b, Tensor::new(val(*b).shape().to_vec(), db).unwrap()));
                }
            }
            Op::Add(a, b) => {
                out.push((*a, g.clone()));
                out.push((*b, g.clone()));
            }
            Op::Sub(a, b) => {
                out.push((*a, g.clone()));
                out.push((*b, g.map(|v| -v)));
            }
            Op::Mul(a, b) => {
                if nodes[*a].requires_grad {
                    out.push((*a, g.zip_map(val(*b), |x, y| x * y)));
                }
                if nodes[*b].requires_grad {
                    out.push((*b, g.zip_map(val(*a), |x, y| x * y)));
                }
            }
            Op::Scale(x, s) => out.push((*x, g.map(|v| v * s))),
            Op::AddScalar(x) => out.push((*x, g.clone())),
            Op::Relu(x) => out.push((*x, g.zip_map(val(*x), |d, v| if v > 0.0 { d } else { 0.0 }))),
            Op::LeakyRelu(x, s) => {
                out.push((*x, g.zip_map(val(*x), |d, v| if v > 0.0 { d } else { s * d })))
            }
            Op::Sigmoid(x) => out.push((*x, g.zip_map(&nodes[i].value, |d, y| d * y * (1.0 - y)))),
            Op::Tanh(x) => out.push((*x, g.zip_map(&nodes[i].value, |d, y| d * (1.0 - y * y)))),
            Op::Sqrt(x) => out.push((*x, g.zip_map(&nodes[i].value, |d, y| 0.5 * d / y))),
            Op::Softmax(x) => {
                let y = &nodes[i].value;
                let c = y.last_dim();
                let mut dx = g.clone();
                for (dr, yr) in dx.data_mut().chunks_mut(c).zip(y.data().chunks(c)) {
                    let dot: f64 = dr.iter().zip(yr).map(|(a, b)| a * b).sum();
                    for (d, &yy) in dr.iter_mut().zip(yr) {
                        *d = yy * (*d - dot);
                    }
                }
                out.push((*x, dx));
            }
            Op::Transpose(x) => out.push((*x, g.transpose2())),
            Op::SliceCols { x, start } => {
                let xs = val(*x).shape();
                let (n, w) = (xs[0], xs[1]);
                let len = g.shape()[1];
                let mut dx = vec![0.0; n * w];
                for r in 0..n {
                    dx[r * w + start..r * w + start + len].copy_from_slice(g.row(r));
                }
                out.push((*x, Tensor::new(vec![n, w], dx).unwrap()));
            }
            Op::ConcatCols(parts) => {
                let n = g.rows();
                let mut off = 0;
                for &p in parts {
                    let w = val(p).shape()[1];
                    if nodes[p].requires_grad {
                        let mut d = Vec::with_capacity(n * w);
                        for r in 0..n {
                            d.extend_from_slice(&g.row(r)[off..off + w]);
                        }
                        out.push((p, Tensor::new(vec![n, w], d).unwrap()));
                    }
                    off += w;
                }
            }
            Op::SumCols(x) => {
                let xs = val(*x).shape().to_vec();
                let w = xs[1];
                let mut d = Vec::with_capacity(xs[0] * w);
                for &gr in g.data() {
                    d.extend(std::iter::repeat_n(gr, w));
                }
                out.push((*x, Tensor::new(xs, d).unwrap()));
            }
            Op::Sum(x) => out.push((*x, Tensor::filled(val(*x).shape(), g.data()[0]))),
            Op::Mean(x) => {
                let n = val(*x).len() as f64;
                out.push((*x, Tensor::filled(val(*x).shape(), g.data()[0] / n)));
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let (n, c) = (xhat.shape()[0], xhat.shape()[1]);
                let gam = val(*gamma).data();
                let mut sum_g = vec![0.0; c];
                let mut sum_gx = vec![0.0; c];
                for r in 0..n {
                    for j in 0..c {
                        let d = g.data()[r * c + j];
                        sum_g[j] += d;
                        sum_gx[j] += d * xhat.data()[r * c + j];
                    }
                }
                if nodes[*x].requires_grad {
                    let nf = n as f64;
                    let mut dx = vec![0.0; n * c];
                    for r in 0..n {
                        for j in 0..c {
                            let d = g.data()[r * c + j];
                            let h = xhat.data()[r * c + j];
                            dx[r * c + j] =
                                gam[j] * inv_std[j] / nf * (nf * d - sum_g[j] - h * sum_gx[j]);
                        }
                    }
                    out.push((*x, Tensor::new(vec![n, c], dx).unwrap()));
                }
                out.push((*gamma, Tensor::new(val(*gamma).shape().to_vec(), sum_gx).unwrap()));
                out.push((*beta, Tensor::new(val(*beta).shape().to_vec(), sum_g).unwrap()));
            }
            Op::Conv1d {
                x,
                kernel,
                bias,
                cols,
            } => {
                let xs = val(*x).shape().to_vec();
                let ks = val(*kernel).shape().to_vec();
                let (n, t, c) = (xs[0], xs[1], xs[2]);
                let (f, k) = (ks[0], ks[1]);
                let tout = t - k + 1;
                let kc = k * c;
                let rows = n * tout;
                if nodes[*kernel].requires_grad {
                    let mut dk = vec![0.0; f * kc];
                    gemm_tn(f, rows, kc, g.data(), cols, &mut dk, false);
                    out.push((*kernel, Tensor::new(ks.clone(), dk).unwrap()));
                }
                if nodes[*bias].requires_grad {
                    let mut db = vec![0.0; f];
                    for chunk in g.data().chunks(f) {
                        for (d, v) in db.iter_mut().zip(chunk) {
                            *d += v;
                        }
                    }
                    out.push((*bias, Tensor::new(vec![f], db).unwrap()));
                }
                if nodes[*x].requires_grad {
                    let mut dcols = vec![0.0; rows * kc];
                    gemm(rows, f, kc, g.data(), val(*kernel).data(), &mut dcols, false);
                    let mut dx = vec![0.0; n * t * c];
                    for b in 0..n {
                        for s in 0..tout {
                            let src = &dcols[(b * tout + s) * kc..(b * tout + s + 1) * kc];
                            let dst = &mut dx[(b * t + s) * c..(b * t + s + k) * c];
                            for (d, v) in dst.iter_mut().zip(src) {
                                *d += v;
                            }
                        }
                    }
                    out.push((*x, Tensor::new(xs, dx).unwrap()));
                }
            }
            Op::MaxPool1d { x, argmax } => {
                let mut dx = Tensor::zeros(val(*x).shape());
                for (o, &src) in argmax.iter().enumerate() {
                    dx.data_mut()[src] += g.data()[o];
                }
                out.push((*x, dx));
            }
            Op::TimeStep { x, t } => {
                let xs = val(*x).shape().to_vec();
                let (n, tt, c) = (xs[0], xs[1], xs[2]);
                let mut dx = vec![0.0; n * tt * c];
                for b in 0..n {
                    dx[(b * tt + t) * c..(b * tt + t + 1) * c].copy_from_slice(g.row(b));
                }
                out.push((*x, Tensor::new(xs, dx).unwrap()));
            }
            Op::StackTime(parts) => {
                let (n, t, h) = (g.shape()[0], g.shape()[1], g.shape()[2]);
                for (s, &p) in parts.iter().enumerate() {
                    if !nodes[p].requires_grad {
                        continue;
                    }
                    let mut d = Vec::with_capacity(n * h);
                    for b in 0..n {
                        d.extend_from_slice(&g.data()[(b * t + s) * h..(b * t + s + 1) * h]);
                    }
                    out.push((p, Tensor::new(vec![n, h], d).unwrap()));
                }
            }
            Op::Reshape(x) => {
                out.push((*x, g.clone().reshape(val(*x).shape().to_vec()).unwrap()));
            }
            Op::SoftmaxXent {
                logits,
                probs,
                targets,
                weights,
                denom,
            } => {
                let c = probs.last_dim();
                let scale = g.data()[0] / denom;
                let mut d = probs.clone();
                for (r, w) in weights.iter().enumerate() {
                    let dr = &mut d.data_mut()[r * c..(r + 1) * c];
                    for (dv, tv) in dr.iter_mut().zip(targets.row(r)) {
                        *dv = if *w == 0.0 { 0.0 } else { (*dv - tv) * w * scale };
                    }
                }
                out.push((*logits, d));
            }
        }
        for (j, t) in out {
            self.acc(j, t);
        }
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable in-place softmax of one row.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}
