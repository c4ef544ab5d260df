//! Reverse-mode differentiation over a recorded list of coarse tensor ops.
//!
//! A [`Tape`] borrows the [`ParamStore`] for the duration of one forward
//! pass. Every op appends a node holding its output; [`Tape::backward`]
//! walks the nodes in reverse and returns the parameter gradients.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::layers::{affine_kernel, conv_kernel, fm_kernel, max_pool_kernel, Activation};
use super::{DropoutMask, Gradients, ParamId, ParamStore, Tensor};
use crate::rng::{fnv1a, mix64};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    Conv {
        input: NodeId,
        filters: NodeId,
        bias: NodeId,
        window: usize,
    },
    Act {
        input: NodeId,
        act: Activation,
    },
    MaxPool {
        input: NodeId,
        argmax: Vec<usize>,
    },
    Affine {
        input: NodeId,
        weight: NodeId,
        bias: NodeId,
    },
    Dropout {
        input: NodeId,
        scales: Vec<f64>,
    },
    Concat(Vec<NodeId>),
    Fm {
        input: NodeId,
        w0: NodeId,
        w: NodeId,
        v: NodeId,
        sums: Vec<f64>,
    },
    Gather {
        table: NodeId,
        row: usize,
    },
    Dot(NodeId, NodeId),
    Sum(Vec<NodeId>),
    Mean(Vec<NodeId>),
    AbsError {
        pred: NodeId,
        target: f64,
    },
    SquaredError {
        pred: NodeId,
        target: f64,
    },
    SquaredDistance(NodeId, NodeId),
    Distance(NodeId, NodeId),
}

#[derive(Debug)]
struct Node {
    op: Op,
    // None for parameter leaves, whose value lives in the store
    value: Option<Tensor>,
    requires_grad: bool,
}

pub struct Tape<'s> {
    store: &'s ParamStore,
    nodes: Vec<Node>,
    params: BTreeMap<ParamId, NodeId>,
}

fn shape_err(msg: alloc::string::String) -> Error {
    Error::Shape(msg)
}

impl<'s> Tape<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Self {
            store,
            nodes: Vec::new(),
            params: BTreeMap::new(),
        }
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            op,
            value: Some(value),
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn rg(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        let node = &self.nodes[id.0];
        match (&node.op, &node.value) {
            (Op::Param(p), _) => self.store.value(*p),
            (_, Some(v)) => v,
            (_, None) => unreachable!("non-parameter nodes always hold a value"),
        }
    }

    /// Scalar value of a one-element node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        self.value(id).item()
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Constant, value, false)
    }

    /// Leaf for a stored parameter. Repeated calls return the same node, so
    /// gradients from every use are accumulated.
    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(n) = self.params.get(&id) {
            return *n;
        }
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
            requires_grad: true,
        });
        let n = NodeId(self.nodes.len() - 1);
        self.params.insert(id, n);
        n
    }

    /// Text convolution pre-activations: input `T x d`, filters `m x t x d`,
    /// bias `m`; output `m x (T - t + 1)`.
    pub fn conv(&mut self, input: NodeId, filters: NodeId, bias: NodeId) -> Result<NodeId> {
        let (is, fs, bs) = (
            self.value(input).shape().to_vec(),
            self.value(filters).shape().to_vec(),
            self.value(bias).shape().to_vec(),
        );
        let ([len, dim], [m, window, fdim], [bm]) = (is.as_slice(), fs.as_slice(), bs.as_slice()) else {
            return Err(shape_err(format!("conv shapes {is:?} {fs:?} {bs:?}")));
        };
        if fdim != dim || bm != m {
            return Err(shape_err(format!("conv shapes {is:?} {fs:?} {bs:?}")));
        }
        if len < window {
            return Err(Error::SequenceTooShort {
                len: *len,
                window: *window,
            });
        }
        let out = conv_kernel(
            self.value(input).data(),
            *len,
            *dim,
            self.value(filters).data(),
            self.value(bias).data(),
            *window,
        );
        let value = Tensor::new(vec![*m, len - window + 1], out)?;
        let rg = self.rg(&[input, filters, bias]);
        Ok(self.push(
            Op::Conv {
                input,
                filters,
                bias,
                window: *window,
            },
            value,
            rg,
        ))
    }

    pub fn activate(&mut self, input: NodeId, act: Activation) -> NodeId {
        if act == Activation::Identity {
            return input;
        }
        let x = self.value(input);
        let data = x.data().iter().map(|v| act.apply(*v)).collect();
        let value = Tensor::new(x.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(&[input]);
        self.push(Op::Act { input, act }, value, rg)
    }

    /// Row-wise max of an `m x w` matrix.
    pub fn max_pool(&mut self, input: NodeId) -> Result<NodeId> {
        let x = self.value(input);
        let [m, w] = x.shape() else {
            return Err(shape_err(format!("max_pool input {:?}", x.shape())));
        };
        if *w == 0 {
            return Err(Error::Empty("max_pool window list"));
        }
        let (out, argmax) = max_pool_kernel(x.data(), *m, *w);
        let rg = self.rg(&[input]);
        Ok(self.push(Op::MaxPool { input, argmax }, Tensor::vector(out), rg))
    }

    /// `x W + b` with `x` of length `in`, `W` of shape `in x out`.
    pub fn affine(&mut self, input: NodeId, weight: NodeId, bias: NodeId) -> Result<NodeId> {
        let (x, w, b) = (self.value(input), self.value(weight), self.value(bias));
        match (x.shape(), w.shape(), b.shape()) {
            ([i], [wi, wo], [o]) if i == wi && wo == o => {}
            (xs, ws, bs) => return Err(shape_err(format!("affine shapes {xs:?} {ws:?} {bs:?}"))),
        }
        let out = affine_kernel(x.data(), w.data(), b.data());
        let rg = self.rg(&[input, weight, bias]);
        Ok(self.push(Op::Affine { input, weight, bias }, Tensor::vector(out), rg))
    }

    pub fn dropout(&mut self, input: NodeId, mask: &DropoutMask) -> Result<NodeId> {
        let x = self.value(input);
        if mask.len() != x.len() {
            return Err(shape_err(format!("dropout mask {} vs input {}", mask.len(), x.len())));
        }
        if mask.is_identity() {
            return Ok(input);
        }
        let scales = mask.scales();
        let data = x.data().iter().zip(&scales).map(|(v, s)| v * s).collect();
        let value = Tensor::new(x.shape().to_vec(), data)?;
        let rg = self.rg(&[input]);
        Ok(self.push(Op::Dropout { input, scales }, value, rg))
    }

    /// Concatenation of vectors.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let mut data = Vec::new();
        for p in parts {
            let v = self.value(*p);
            if v.shape().len() != 1 {
                return Err(shape_err(format!("concat expects vectors, got {:?}", v.shape())));
            }
            data.extend_from_slice(v.data());
        }
        let rg = self.rg(parts);
        Ok(self.push(Op::Concat(parts.to_vec()), Tensor::vector(data), rg))
    }

    /// Factorization machine over `input` (length `p`) with bias `w0`,
    /// linear weights `w` (`p`) and factors `v` (`p x k`).
    pub fn fm(&mut self, input: NodeId, w0: NodeId, w: NodeId, v: NodeId) -> Result<NodeId> {
        let (z, b, lw, fv) = (self.value(input), self.value(w0), self.value(w), self.value(v));
        let p = z.len();
        if z.shape().len() != 1 || b.len() != 1 || lw.shape() != [p] || fv.shape().len() != 2 || fv.shape()[0] != p {
            return Err(shape_err(format!(
                "fm shapes z {:?} w0 {:?} w {:?} v {:?}",
                z.shape(),
                b.shape(),
                lw.shape(),
                fv.shape()
            )));
        }
        let rank = fv.shape()[1];
        let (out, sums) = fm_kernel(z.data(), b.item(), lw.data(), fv.data(), rank);
        let rg = self.rg(&[input, w0, w, v]);
        Ok(self.push(Op::Fm { input, w0, w, v, sums }, Tensor::scalar(out), rg))
    }

    /// Row `row` of a `rows x n` table.
    pub fn gather(&mut self, table: NodeId, row: usize) -> Result<NodeId> {
        let t = self.value(table);
        if t.shape().len() != 2 || row >= t.rows() {
            return Err(shape_err(format!("gather row {row} from {:?}", t.shape())));
        }
        let value = Tensor::vector(t.row(row).to_vec());
        let rg = self.rg(&[table]);
        Ok(self.push(Op::Gather { table, row }, value, rg))
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (x, y) = (self.value(a), self.value(b));
        if x.len() != y.len() {
            return Err(shape_err(format!("dot {:?} vs {:?}", x.shape(), y.shape())));
        }
        let s = x.data().iter().zip(y.data()).map(|(p, q)| p * q).sum();
        let rg = self.rg(&[a, b]);
        Ok(self.push(Op::Dot(a, b), Tensor::scalar(s), rg))
    }

    fn check_scalars(&self, parts: &[NodeId]) -> Result<()> {
        if parts.is_empty() {
            return Err(Error::Empty("scalar reduction"));
        }
        if let Some(p) = parts.iter().find(|p| self.value(**p).len() != 1) {
            return Err(shape_err(format!("expected scalar, got {:?}", self.value(*p).shape())));
        }
        Ok(())
    }

    /// Sum of scalar nodes.
    pub fn sum(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        self.check_scalars(parts)?;
        let s = parts.iter().map(|p| self.scalar(*p)).sum();
        let rg = self.rg(parts);
        Ok(self.push(Op::Sum(parts.to_vec()), Tensor::scalar(s), rg))
    }

    /// Mean of scalar nodes.
    pub fn mean(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        self.check_scalars(parts)?;
        let s: f64 = parts.iter().map(|p| self.scalar(*p)).sum();
        let rg = self.rg(parts);
        Ok(self.push(Op::Mean(parts.to_vec()), Tensor::scalar(s / parts.len() as f64), rg))
    }

    /// `|target - pred|`; the subgradient at zero error is 0.
    pub fn abs_error(&mut self, pred: NodeId, target: f64) -> Result<NodeId> {
        self.check_scalars(&[pred])?;
        let v = libm::fabs(target - self.scalar(pred));
        let rg = self.rg(&[pred]);
        Ok(self.push(Op::AbsError { pred, target }, Tensor::scalar(v), rg))
    }

    /// `(target - pred)^2`.
    pub fn squared_error(&mut self, pred: NodeId, target: f64) -> Result<NodeId> {
        self.check_scalars(&[pred])?;
        let d = target - self.scalar(pred);
        let rg = self.rg(&[pred]);
        Ok(self.push(Op::SquaredError { pred, target }, Tensor::scalar(d * d), rg))
    }

    fn check_pair(&self, a: NodeId, b: NodeId) -> Result<()> {
        if self.value(a).len() != self.value(b).len() {
            return Err(shape_err(format!(
                "distance operands {:?} vs {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        Ok(())
    }

    /// `||a - b||^2`.
    pub fn squared_distance(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check_pair(a, b)?;
        let s = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        let rg = self.rg(&[a, b]);
        Ok(self.push(Op::SquaredDistance(a, b), Tensor::scalar(s), rg))
    }

    /// `||a - b||`; the subgradient at `a == b` is 0.
    pub fn distance(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.check_pair(a, b)?;
        let s: f64 = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        let rg = self.rg(&[a, b]);
        Ok(self.push(Op::Distance(a, b), Tensor::scalar(libm::sqrt(s)), rg))
    }

    /// Hash of every discrete choice made in the forward pass (max-pool
    /// winners and absolute-error signs). Two forward passes with the same
    /// signature are on the same smooth piece of the loss surface.
    pub fn branch_signature(&self) -> u64 {
        let mut h = fnv1a(b"branches");
        for node in &self.nodes {
            match &node.op {
                Op::MaxPool { argmax, .. } => {
                    for a in argmax {
                        h = mix64(h ^ *a as u64);
                    }
                }
                Op::AbsError { pred, target } => {
                    let d = self.scalar(*pred) - target;
                    h = mix64(h ^ u64::from(d > 0.0) ^ (u64::from(d == 0.0) << 1));
                }
                Op::Act {
                    input,
                    act: Activation::Relu,
                } => {
                    for v in self.value(*input).data() {
                        h = mix64(h ^ u64::from(*v > 0.0));
                    }
                }
                _ => {}
            }
        }
        h
    }

    /// Gradients of the scalar node `loss` with respect to every parameter
    /// used in the recorded computation.
    pub fn backward(self, loss: NodeId) -> Result<Gradients> {
        if loss.0 >= self.nodes.len() {
            return Err(Error::NoForward(loss.0));
        }
        if self.value(loss).len() != 1 {
            return Err(shape_err(format!(
                "loss must be scalar, got {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        let mut out = Gradients::default();

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            match &node.op {
                Op::Constant => {}
                Op::Param(p) => {
                    let shape = self.store.value(*p).shape().to_vec();
                    out.insert(*p, Tensor::new(shape, g)?);
                }
                Op::Conv {
                    input,
                    filters,
                    bias,
                    window,
                } => {
                    let x = self.value(*input);
                    let k = self.value(*filters);
                    let (dim, m) = (x.shape()[1], k.shape()[0]);
                    let width = window * dim;
                    let positions = x.shape()[0] + 1 - window;
                    let need_x = self.nodes[input.0].requires_grad;
                    let need_k = self.nodes[filters.0].requires_grad;
                    let need_b = self.nodes[bias.0].requires_grad;
                    let mut gx = if need_x { vec![0.0; x.len()] } else { Vec::new() };
                    let mut gk = if need_k { vec![0.0; k.len()] } else { Vec::new() };
                    let mut gb = if need_b { vec![0.0; m] } else { Vec::new() };
                    for j in 0..m {
                        let kj = &k.data()[j * width..(j + 1) * width];
                        for s in 0..positions {
                            let gs = g[j * positions + s];
                            if gs == 0.0 {
                                continue;
                            }
                            let win = &x.data()[s * dim..s * dim + width];
                            if need_k {
                                for (a, b) in gk[j * width..(j + 1) * width].iter_mut().zip(win) {
                                    *a += gs * b;
                                }
                            }
                            if need_x {
                                for (a, b) in gx[s * dim..s * dim + width].iter_mut().zip(kj) {
                                    *a += gs * b;
                                }
                            }
                            if need_b {
                                gb[j] += gs;
                            }
                        }
                    }
                    if need_x {
                        add_into(&mut grads, *input, gx);
                    }
                    if need_k {
                        add_into(&mut grads, *filters, gk);
                    }
                    if need_b {
                        add_into(&mut grads, *bias, gb);
                    }
                }
                Op::Act { input, act } => {
                    let y = node.value.as_ref().expect("value");
                    let gi = g
                        .iter()
                        .zip(y.data())
                        .map(|(a, v)| a * act.derivative_from_output(*v))
                        .collect();
                    add_into(&mut grads, *input, gi);
                }
                Op::MaxPool { input, argmax } => {
                    let x = self.value(*input);
                    let w = x.shape()[1];
                    let mut gi = vec![0.0; x.len()];
                    for (j, a) in argmax.iter().enumerate() {
                        gi[j * w + a] = g[j];
                    }
                    add_into(&mut grads, *input, gi);
                }
                Op::Affine { input, weight, bias } => {
                    let x = self.value(*input);
                    let w = self.value(*weight);
                    let cols = g.len();
                    if self.nodes[input.0].requires_grad {
                        let gi = (0..x.len())
                            .map(|r| w.row(r).iter().zip(&g).map(|(a, b)| a * b).sum())
                            .collect();
                        add_into(&mut grads, *input, gi);
                    }
                    if self.nodes[weight.0].requires_grad {
                        let mut gw = vec![0.0; w.len()];
                        for (r, xr) in x.data().iter().enumerate() {
                            for (c, gc) in g.iter().enumerate() {
                                gw[r * cols + c] = xr * gc;
                            }
                        }
                        add_into(&mut grads, *weight, gw);
                    }
                    if self.nodes[bias.0].requires_grad {
                        add_into(&mut grads, *bias, g);
                    }
                }
                Op::Dropout { input, scales } => {
                    let gi = g.iter().zip(scales).map(|(a, s)| a * s).collect();
                    add_into(&mut grads, *input, gi);
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let n = self.value(*p).len();
                        if self.nodes[p.0].requires_grad {
                            add_into(&mut grads, *p, g[off..off + n].to_vec());
                        }
                        off += n;
                    }
                }
                Op::Fm { input, w0, w, v, sums } => {
                    let up = g[0];
                    let z = self.value(*input).data();
                    let lw = self.value(*w).data();
                    let fv = self.value(*v).data();
                    let rank = sums.len();
                    if self.nodes[w0.0].requires_grad {
                        add_into(&mut grads, *w0, vec![up]);
                    }
                    if self.nodes[w.0].requires_grad {
                        add_into(&mut grads, *w, z.iter().map(|zi| up * zi).collect());
                    }
                    if self.nodes[v.0].requires_grad {
                        let mut gv = vec![0.0; fv.len()];
                        for (i, zi) in z.iter().enumerate() {
                            for f in 0..rank {
                                let vif = fv[i * rank + f];
                                gv[i * rank + f] = up * (zi * sums[f] - vif * zi * zi);
                            }
                        }
                        add_into(&mut grads, *v, gv);
                    }
                    if self.nodes[input.0].requires_grad {
                        let gz = z
                            .iter()
                            .enumerate()
                            .map(|(i, zi)| {
                                let vi = &fv[i * rank..(i + 1) * rank];
                                let inter: f64 = vi.iter().zip(sums).map(|(a, s)| a * s - a * a * zi).sum();
                                up * (lw[i] + inter)
                            })
                            .collect();
                        add_into(&mut grads, *input, gz);
                    }
                }
                Op::Gather { table, row } => {
                    let t = self.value(*table);
                    let n = t.row_len();
                    let mut gt = vec![0.0; t.len()];
                    gt[row * n..(row + 1) * n].copy_from_slice(&g);
                    add_into(&mut grads, *table, gt);
                }
                Op::Dot(a, b) => {
                    let up = g[0];
                    let (x, y) = (self.value(*a).data(), self.value(*b).data());
                    if self.nodes[a.0].requires_grad {
                        add_into(&mut grads, *a, y.iter().map(|q| up * q).collect());
                    }
                    if self.nodes[b.0].requires_grad {
                        add_into(&mut grads, *b, x.iter().map(|p| up * p).collect());
                    }
                }
                Op::Sum(parts) => {
                    for p in parts {
                        add_into(&mut grads, *p, vec![g[0]]);
                    }
                }
                Op::Mean(parts) => {
                    let share = g[0] / parts.len() as f64;
                    for p in parts {
                        add_into(&mut grads, *p, vec![share]);
                    }
                }
                Op::AbsError { pred, target } => {
                    let d = self.scalar(*pred) - target;
                    let sign = if d > 0.0 {
                        1.0
                    } else if d < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    add_into(&mut grads, *pred, vec![g[0] * sign]);
                }
                Op::SquaredError { pred, target } => {
                    let d = self.scalar(*pred) - target;
                    add_into(&mut grads, *pred, vec![2.0 * d * g[0]]);
                }
                Op::SquaredDistance(a, b) => {
                    let diff: Vec<f64> = self
                        .value(*a)
                        .data()
                        .iter()
                        .zip(self.value(*b).data())
                        .map(|(x, y)| x - y)
                        .collect();
                    if self.nodes[a.0].requires_grad {
                        add_into(&mut grads, *a, diff.iter().map(|d| 2.0 * d * g[0]).collect());
                    }
                    if self.nodes[b.0].requires_grad {
                        add_into(&mut grads, *b, diff.iter().map(|d| -2.0 * d * g[0]).collect());
                    }
                }
                Op::Distance(a, b) => {
                    let norm = node.value.as_ref().expect("value").item();
                    if norm == 0.0 {
                        continue;
                    }
                    let diff: Vec<f64> = self
                        .value(*a)
                        .data()
                        .iter()
                        .zip(self.value(*b).data())
                        .map(|(x, y)| (x - y) / norm)
                        .collect();
                    if self.nodes[a.0].requires_grad {
                        add_into(&mut grads, *a, diff.iter().map(|d| d * g[0]).collect());
                    }
                    if self.nodes[b.0].requires_grad {
                        add_into(&mut grads, *b, diff.iter().map(|d| -d * g[0]).collect());
                    }
                }
            }
        }
        Ok(out)
    }
}

fn add_into(grads: &mut [Option<Vec<f64>>], id: NodeId, g: Vec<f64>) {
    match &mut grads[id.0] {
        Some(acc) => {
            for (a, b) in acc.iter_mut().zip(&g) {
                *a += b;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init;
    use crate::rng;

    #[test]
    fn backward_without_forward_is_an_error() {
        let store = ParamStore::new();
        let tape = Tape::new(&store);
        assert_eq!(tape.backward(NodeId(0)).unwrap_err(), Error::NoForward(0));
    }

    #[test]
    fn constant_loss_has_no_gradients() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::vector(vec![1.0, 2.0]));
        let mut tape = Tape::new(&store);
        let _ = tape.param(id);
        let c = tape.constant(Tensor::scalar(4.0));
        let loss = tape.abs_error(c, 1.0).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert!(grads.is_zero(id));
    }

    #[test]
    fn tanh_backward_at_zero_is_one() {
        let mut store = ParamStore::new();
        let id = store.add("x", Tensor::vector(vec![0.0]));
        let mut tape = Tape::new(&store);
        let x = tape.param(id);
        let y = tape.activate(x, Activation::Tanh);
        let one = tape.constant(Tensor::vector(vec![1.0]));
        let loss = tape.dot(y, one).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(id).unwrap().data(), &[1.0]);
    }

    #[test]
    fn param_leaf_reuse_accumulates() {
        let mut store = ParamStore::new();
        let id = store.add("x", Tensor::vector(vec![3.0]));
        let mut tape = Tape::new(&store);
        let a = tape.param(id);
        let b = tape.param(id);
        assert_eq!(a, b);
        let loss = tape.dot(a, b).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(id).unwrap().data(), &[6.0]);
    }

    #[test]
    fn max_pool_routes_to_first_argmax() {
        let mut store = ParamStore::new();
        let id = store.add("f", Tensor::matrix(1, 3, vec![2.0, 2.0, 1.0]).unwrap());
        let mut tape = Tape::new(&store);
        let f = tape.param(id);
        let o = tape.max_pool(f).unwrap();
        let one = tape.constant(Tensor::vector(vec![1.0]));
        let loss = tape.dot(o, one).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(id).unwrap().data(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn l1_subgradient_at_zero() {
        let mut store = ParamStore::new();
        let id = store.add("p", Tensor::scalar(2.0));
        let mut tape = Tape::new(&store);
        let p = tape.param(id);
        let loss = tape.abs_error(p, 2.0).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(id).unwrap().data(), &[0.0]);
    }

    #[test]
    fn conv_matches_plain_forward() {
        let mut r = rng::stream(4, "tape-conv");
        let mut store = ParamStore::new();
        let k = store.add("k", init::uniform(&mut r, &[3, 2, 4], -1.0, 1.0));
        let b = store.add("b", init::uniform(&mut r, &[3], -1.0, 1.0));
        let x = init::uniform(&mut r, &[7, 4], -1.0, 1.0);
        let plain = super::super::conv_text_forward(&x, store.value(k), store.value(b), Activation::Tanh).unwrap();
        let mut tape = Tape::new(&store);
        let xi = tape.constant(x);
        let (kn, bn) = (tape.param(k), tape.param(b));
        let c = tape.conv(xi, kn, bn).unwrap();
        let y = tape.activate(c, Activation::Tanh);
        assert_eq!(tape.value(y), &plain);
    }
}
