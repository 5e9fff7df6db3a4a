//! Reverse-mode automatic differentiation over dense tensors.
//!
//! A [`Graph`] is an append-only arena of nodes. Every operation pushes a new
//! node whose inputs already exist, so node order is a topological order and
//! [`Graph::backward`] simply walks the arena from the root down to index 0,
//! visiting each node once.
//!
//! ```
//! use divnet_core::{Graph, Tensor};
//!
//! let mut g = Graph::new();
//! let a = g.param(Tensor::from_rows(&[[1.0, 2.0]]).unwrap());
//! let b = g.constant(Tensor::from_rows(&[[3.0], [4.0]]).unwrap());
//! let ab = g.matmul(a, b).unwrap();
//! let loss = g.sum(ab);
//! g.backward(loss).unwrap();
//! assert_eq!(g.value(loss).item(), 11.0);
//! assert_eq!(g.grad(a).unwrap().data(), &[3.0, 4.0]);
//! ```

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{arg_err, dim_err, Error, Result};
use crate::tensor::{gemm_acc, gemm_nt_acc, gemm_tn_acc, Tensor};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Elementwise nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Tanh => libm::tanh(x),
            Activation::Sigmoid => 1.0 / (1.0 + libm::exp(-x)),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the input `x` and the output `y`.
    /// The relu derivative at exactly 0 is 0.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "sigmoid" => Some(Activation::Sigmoid),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Reduction axis of a 2-D node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Reduce down each column (result `1 × cols`).
    Rows,
    /// Reduce along each row (result `rows × 1`).
    Cols,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    AddBias(NodeId, NodeId),
    Activate(NodeId, Activation),
    ConcatFeatures(NodeId, NodeId),
    ConcatRows(Vec<NodeId>),
    GatherRows(NodeId, Vec<usize>),
    SqError(NodeId, Tensor),
    PairwiseSqError(NodeId, Tensor),
    /// Hard selection among scalar nodes; `index` is the winner.
    Select { inputs: Vec<NodeId>, index: usize },
    /// Hard min/max reduction; `winners[k]` is the flat source index of output `k`.
    Reduce { input: NodeId, winners: Vec<usize> },
    Sum(NodeId),
    Scale(NodeId, f64),
    Add(NodeId, NodeId),
    AddN(Vec<NodeId>),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// Arena-backed computation graph.
///
/// A graph is built for one forward pass, differentiated once, and dropped.
#[derive(Debug, Default, Clone)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
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
            value,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn needs(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    /// A trainable leaf; its gradient is available after [`Graph::backward`].
    pub fn param(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value, true)
    }

    /// A leaf that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value, false)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Gradient of the last backward root with respect to `id`, if any flowed.
    pub fn grad(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    /// Inputs of a node in argument order.
    pub fn inputs(&self, id: NodeId) -> Vec<NodeId> {
        match &self.nodes[id.0].op {
            Op::Leaf => Vec::new(),
            Op::MatMul(a, b)
            | Op::AddBias(a, b)
            | Op::ConcatFeatures(a, b)
            | Op::Add(a, b) => vec![*a, *b],
            Op::Activate(a, _)
            | Op::GatherRows(a, _)
            | Op::SqError(a, _)
            | Op::PairwiseSqError(a, _)
            | Op::Sum(a)
            | Op::Scale(a, _) => vec![*a],
            Op::Reduce { input, .. } => vec![*input],
            Op::ConcatRows(ids) | Op::AddN(ids) | Op::Select { inputs: ids, .. } => ids.clone(),
        }
    }

    fn matrix_dims(&self, id: NodeId, what: &str) -> Result<(usize, usize)> {
        let s = self.value(id).shape();
        if s.len() != 2 {
            return Err(dim_err!("{} must be a matrix, got shape {:?}", what, s));
        }
        Ok((s[0], s[1]))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, n) = self.matrix_dims(a, "matmul lhs")?;
        let (n2, p) = self.matrix_dims(b, "matmul rhs")?;
        if n != n2 {
            return Err(dim_err!(
                "matmul inner dimensions differ: {:?} · {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            ));
        }
        let mut out = vec![0.0; m * p];
        gemm_acc(self.value(a).data(), self.value(b).data(), &mut out, m, n, p);
        let rg = self.needs(&[a, b]);
        Ok(self.push(Op::MatMul(a, b), Tensor::matrix(m, p, out)?, rg))
    }

    /// Adds the vector `b` to every row of `a`.
    pub fn add_bias(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, n) = self.matrix_dims(a, "add_bias input")?;
        let bs = self.value(b).shape();
        if bs.len() != 1 || bs[0] != n {
            return Err(dim_err!(
                "bias shape {:?} does not match trailing dimension of {:?}",
                bs,
                self.value(a).shape()
            ));
        }
        let bias = self.value(b).data();
        let mut out = self.value(a).data().to_vec();
        for row in out.chunks_mut(n.max(1)).take(m) {
            for (o, &bv) in row.iter_mut().zip(bias) {
                *o += bv;
            }
        }
        let rg = self.needs(&[a, b]);
        Ok(self.push(Op::AddBias(a, b), Tensor::matrix(m, n, out)?, rg))
    }

    pub fn activation(&mut self, a: NodeId, kind: Activation) -> NodeId {
        let value = self.value(a).map(|x| kind.apply(x));
        let rg = self.needs(&[a]);
        self.push(Op::Activate(a, kind), value, rg)
    }

    /// Feature-axis concatenation `[a | b]`.
    pub fn concat_features(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, n1) = self.matrix_dims(a, "concat lhs")?;
        let (m2, n2) = self.matrix_dims(b, "concat rhs")?;
        if m != m2 {
            return Err(dim_err!(
                "concat leading dimensions differ: {:?} vs {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            ));
        }
        let mut out = Vec::with_capacity(m * (n1 + n2));
        for i in 0..m {
            out.extend_from_slice(&self.value(a).data()[i * n1..(i + 1) * n1]);
            out.extend_from_slice(&self.value(b).data()[i * n2..(i + 1) * n2]);
        }
        let rg = self.needs(&[a, b]);
        Ok(self.push(Op::ConcatFeatures(a, b), Tensor::matrix(m, n1 + n2, out)?, rg))
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = parts
            .first()
            .ok_or_else(|| arg_err!("concat_rows needs at least one input"))?;
        let (_, n) = self.matrix_dims(*first, "concat_rows input")?;
        let mut rows = 0;
        let mut out = Vec::new();
        for &p in parts {
            let (m, n2) = self.matrix_dims(p, "concat_rows input")?;
            if n2 != n {
                return Err(dim_err!("concat_rows column counts differ: {} vs {}", n, n2));
            }
            rows += m;
            out.extend_from_slice(self.value(p).data());
        }
        let rg = self.needs(parts);
        Ok(self.push(Op::ConcatRows(parts.to_vec()), Tensor::matrix(rows, n, out)?, rg))
    }

    /// Selects rows of `a` in the given order (repeats allowed).
    pub fn gather_rows(&mut self, a: NodeId, rows: &[usize]) -> Result<NodeId> {
        let (m, n) = self.matrix_dims(a, "gather_rows input")?;
        let mut out = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            if r >= m {
                return Err(arg_err!("row {} out of range for {} rows", r, m));
            }
            out.extend_from_slice(self.value(a).row(r));
        }
        let rg = self.needs(&[a]);
        Ok(self.push(
            Op::GatherRows(a, rows.to_vec()),
            Tensor::matrix(rows.len(), n, out)?,
            rg,
        ))
    }

    /// Mean over all elements of `(a − target)²`, a scalar.
    pub fn sq_error(&mut self, a: NodeId, target: &Tensor) -> Result<NodeId> {
        if self.value(a).shape() != target.shape() {
            return Err(dim_err!(
                "sq_error shapes differ: {:?} vs {:?}",
                self.value(a).shape(),
                target.shape()
            ));
        }
        let n = target.len();
        let sum: f64 = self
            .value(a)
            .data()
            .iter()
            .zip(target.data())
            .map(|(p, t)| (p - t) * (p - t))
            .sum();
        let value = if n == 0 { 0.0 } else { sum / n as f64 };
        let rg = self.needs(&[a]);
        Ok(self.push(Op::SqError(a, target.clone()), Tensor::scalar(value), rg))
    }

    /// Entry `[i][j]` is the mean squared error between row `i` of `a` and
    /// row `j` of `labels`.
    pub fn pairwise_sq_error(&mut self, a: NodeId, labels: &Tensor) -> Result<NodeId> {
        let (m, d) = self.matrix_dims(a, "pairwise_sq_error predictions")?;
        if labels.rank() != 2 || labels.cols() != d {
            return Err(dim_err!(
                "label matrix {:?} does not match prediction width {}",
                labels.shape(),
                d
            ));
        }
        let l = labels.rows();
        let preds = self.value(a);
        let mut out = Vec::with_capacity(m * l);
        for i in 0..m {
            let p = preds.row(i);
            for j in 0..l {
                let y = labels.row(j);
                let s: f64 = p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                out.push(if d == 0 { 0.0 } else { s / d as f64 });
            }
        }
        let rg = self.needs(&[a]);
        Ok(self.push(
            Op::PairwiseSqError(a, labels.clone()),
            Tensor::matrix(m, l, out)?,
            rg,
        ))
    }

    fn select(&mut self, inputs: &[NodeId], want_max: bool) -> Result<(NodeId, usize)> {
        if inputs.is_empty() {
            return Err(arg_err!("selection over an empty list"));
        }
        let mut best = 0;
        let mut best_v = self.scalar_of(inputs[0])?;
        for (i, &id) in inputs.iter().enumerate().skip(1) {
            let v = self.scalar_of(id)?;
            if (want_max && v > best_v) || (!want_max && v < best_v) {
                best = i;
                best_v = v;
            }
        }
        let rg = self.needs(inputs);
        let id = self.push(
            Op::Select {
                inputs: inputs.to_vec(),
                index: best,
            },
            Tensor::scalar(best_v),
            rg,
        );
        Ok((id, best))
    }

    fn scalar_of(&self, id: NodeId) -> Result<f64> {
        let v = self.value(id);
        if v.len() != 1 {
            return Err(dim_err!("expected a scalar node, got shape {:?}", v.shape()));
        }
        Ok(v.item())
    }

    /// Minimum of scalar nodes; ties go to the lowest index.
    pub fn select_min(&mut self, losses: &[NodeId]) -> Result<(NodeId, usize)> {
        self.select(losses, false)
    }

    /// Maximum of scalar nodes; ties go to the lowest index.
    pub fn select_max(&mut self, losses: &[NodeId]) -> Result<(NodeId, usize)> {
        self.select(losses, true)
    }

    fn reduce(&mut self, a: NodeId, axis: Axis, want_max: bool) -> Result<NodeId> {
        let (m, n) = self.matrix_dims(a, "reduction input")?;
        let (outer, inner) = match axis {
            Axis::Rows => (n, m),
            Axis::Cols => (m, n),
        };
        if inner == 0 {
            return Err(arg_err!("reduction over an empty axis"));
        }
        let v = self.value(a).data();
        let flat = |o: usize, i: usize| match axis {
            Axis::Rows => i * n + o,
            Axis::Cols => o * n + i,
        };
        let mut winners = Vec::with_capacity(outer);
        let mut out = Vec::with_capacity(outer);
        for o in 0..outer {
            let mut best = flat(o, 0);
            for i in 1..inner {
                let f = flat(o, i);
                if (want_max && v[f] > v[best]) || (!want_max && v[f] < v[best]) {
                    best = f;
                }
            }
            winners.push(best);
            out.push(v[best]);
        }
        let shape = match axis {
            Axis::Rows => [1, n],
            Axis::Cols => [m, 1],
        };
        let rg = self.needs(&[a]);
        Ok(self.push(Op::Reduce { input: a, winners }, Tensor::new(&shape, out)?, rg))
    }

    /// Hard minimum along an axis; ties go to the lowest index.
    pub fn min_axis(&mut self, a: NodeId, axis: Axis) -> Result<NodeId> {
        self.reduce(a, axis, false)
    }

    /// Hard maximum along an axis; ties go to the lowest index.
    pub fn max_axis(&mut self, a: NodeId, axis: Axis) -> Result<NodeId> {
        self.reduce(a, axis, true)
    }

    /// Flat source indices chosen by a `min_axis`/`max_axis` node.
    pub fn winners(&self, id: NodeId) -> Option<&[usize]> {
        match &self.nodes[id.0].op {
            Op::Reduce { winners, .. } => Some(winners),
            _ => None,
        }
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s: f64 = self.value(a).data().iter().sum();
        let rg = self.needs(&[a]);
        self.push(Op::Sum(a), Tensor::scalar(s), rg)
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let n = self.value(a).len().max(1);
        let s = self.sum(a);
        self.scale(s, 1.0 / n as f64)
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let value = self.value(a).map(|x| x * factor);
        let rg = self.needs(&[a]);
        self.push(Op::Scale(a, factor), value, rg)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(dim_err!(
                "add shapes differ: {:?} vs {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            ));
        }
        let mut value = self.value(a).clone();
        value.add_assign(self.value(b));
        let rg = self.needs(&[a, b]);
        Ok(self.push(Op::Add(a, b), value, rg))
    }

    /// Sum of equally shaped nodes, accumulated left to right.
    pub fn add_n(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = parts
            .first()
            .ok_or_else(|| arg_err!("add_n needs at least one input"))?;
        let mut value = self.value(*first).clone();
        for &p in &parts[1..] {
            if self.value(p).shape() != value.shape() {
                return Err(dim_err!(
                    "add_n shapes differ: {:?} vs {:?}",
                    value.shape(),
                    self.value(p).shape()
                ));
            }
            value.add_assign(self.value(p));
        }
        let rg = self.needs(parts);
        Ok(self.push(Op::AddN(parts.to_vec()), value, rg))
    }

    fn accumulate(&mut self, id: NodeId, g: Tensor) {
        if !self.nodes[id.0].requires_grad {
            return;
        }
        match &mut self.grads[id.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    /// Back-propagates from the scalar node `root`, replacing any previous
    /// gradients.
    pub fn backward(&mut self, root: NodeId) -> Result<()> {
        let rv = self.value(root);
        if rv.len() != 1 {
            return Err(dim_err!("backward root must be a scalar, got {:?}", rv.shape()));
        }
        if !rv.is_finite() {
            return Err(Error::Numerical(String::from("non-finite backward root")));
        }
        let root_grad = Tensor::full(rv.shape(), 1.0);
        self.grads = vec![None; self.nodes.len()];
        self.accumulate(root, root_grad);
        for i in (0..=root.0).rev() {
            let Some(g) = self.grads[i].take() else {
                continue;
            };
            let op = core::mem::replace(&mut self.nodes[i].op, Op::Leaf);
            self.propagate(&op, NodeId(i), &g);
            self.nodes[i].op = op;
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    fn propagate(&mut self, op: &Op, out: NodeId, g: &Tensor) {
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, n) = dims(self.value(*a));
                let p = self.value(*b).cols();
                if self.nodes[a.0].requires_grad {
                    let mut ga = vec![0.0; m * n];
                    gemm_nt_acc(g.data(), self.value(*b).data(), &mut ga, m, n, p);
                    self.accumulate(*a, Tensor::matrix(m, n, ga).expect("shape"));
                }
                if self.nodes[b.0].requires_grad {
                    let mut gb = vec![0.0; n * p];
                    gemm_tn_acc(self.value(*a).data(), g.data(), &mut gb, m, n, p);
                    self.accumulate(*b, Tensor::matrix(n, p, gb).expect("shape"));
                }
            }
            Op::AddBias(a, b) => {
                self.accumulate(*a, g.clone());
                if self.nodes[b.0].requires_grad {
                    let n = g.cols();
                    let mut gb = vec![0.0; n];
                    for i in 0..g.rows() {
                        for (acc, v) in gb.iter_mut().zip(g.row(i)) {
                            *acc += v;
                        }
                    }
                    self.accumulate(*b, Tensor::vector(gb));
                }
            }
            Op::Activate(a, kind) => {
                let x = self.value(*a);
                let y = self.value(out);
                let data = x
                    .data()
                    .iter()
                    .zip(y.data())
                    .zip(g.data())
                    .map(|((&xi, &yi), &gi)| gi * kind.derivative(xi, yi))
                    .collect();
                let t = Tensor::new(x.shape(), data).expect("shape");
                self.accumulate(*a, t);
            }
            Op::ConcatFeatures(a, b) => {
                let (m, n1) = dims(self.value(*a));
                let n2 = self.value(*b).cols();
                let mut ga = Vec::with_capacity(m * n1);
                let mut gb = Vec::with_capacity(m * n2);
                for i in 0..m {
                    let row = &g.data()[i * (n1 + n2)..(i + 1) * (n1 + n2)];
                    ga.extend_from_slice(&row[..n1]);
                    gb.extend_from_slice(&row[n1..]);
                }
                self.accumulate(*a, Tensor::matrix(m, n1, ga).expect("shape"));
                self.accumulate(*b, Tensor::matrix(m, n2, gb).expect("shape"));
            }
            Op::ConcatRows(parts) => {
                let n = g.cols();
                let mut offset = 0;
                for &p in parts {
                    let m = self.value(p).rows();
                    let slice = g.data()[offset * n..(offset + m) * n].to_vec();
                    offset += m;
                    self.accumulate(p, Tensor::matrix(m, n, slice).expect("shape"));
                }
            }
            Op::GatherRows(a, rows) => {
                if self.nodes[a.0].requires_grad {
                    let (m, n) = dims(self.value(*a));
                    let mut ga = vec![0.0; m * n];
                    for (k, &r) in rows.iter().enumerate() {
                        for (acc, v) in ga[r * n..(r + 1) * n].iter_mut().zip(g.row(k)) {
                            *acc += v;
                        }
                    }
                    self.accumulate(*a, Tensor::matrix(m, n, ga).expect("shape"));
                }
            }
            Op::SqError(a, target) => {
                let x = self.value(*a);
                let scale = 2.0 * g.item() / target.len().max(1) as f64;
                let data = x
                    .data()
                    .iter()
                    .zip(target.data())
                    .map(|(p, t)| scale * (p - t))
                    .collect();
                let t = Tensor::new(x.shape(), data).expect("shape");
                self.accumulate(*a, t);
            }
            Op::PairwiseSqError(a, labels) => {
                if self.nodes[a.0].requires_grad {
                    let (m, d) = dims(self.value(*a));
                    let l = labels.rows();
                    let preds = self.value(*a);
                    let mut ga = vec![0.0; m * d];
                    let norm = 2.0 / d.max(1) as f64;
                    for i in 0..m {
                        let p = preds.row(i);
                        let gi = &mut ga[i * d..(i + 1) * d];
                        for j in 0..l {
                            let gij = g.data()[i * l + j];
                            if gij == 0.0 {
                                continue;
                            }
                            let y = labels.row(j);
                            for ((acc, &pv), &yv) in gi.iter_mut().zip(p).zip(y) {
                                *acc += norm * gij * (pv - yv);
                            }
                        }
                    }
                    self.accumulate(*a, Tensor::matrix(m, d, ga).expect("shape"));
                }
            }
            Op::Select { inputs, index } => {
                let id = inputs[*index];
                let shape = self.value(id).shape().to_vec();
                self.accumulate(id, Tensor::new(&shape, vec![g.item()]).expect("shape"));
            }
            Op::Reduce { input, winners } => {
                let shape = self.value(*input).shape().to_vec();
                let mut gi = Tensor::zeros(&shape);
                for (&w, &gv) in winners.iter().zip(g.data()) {
                    gi.data_mut()[w] += gv;
                }
                self.accumulate(*input, gi);
            }
            Op::Sum(a) => {
                let shape = self.value(*a).shape().to_vec();
                self.accumulate(*a, Tensor::full(&shape, g.item()));
            }
            Op::Scale(a, factor) => {
                self.accumulate(*a, g.map(|v| v * factor));
            }
            Op::Add(a, b) => {
                self.accumulate(*a, g.clone());
                self.accumulate(*b, g.clone());
            }
            Op::AddN(parts) => {
                for &p in parts {
                    self.accumulate(p, g.clone());
                }
            }
        }
    }
}

fn dims(t: &Tensor) -> (usize, usize) {
    (t.rows(), t.cols())
}

/// Per-block result of [`grad_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Maximum relative error per parameter tensor, in input order.
    pub max_rel_error: Vec<f64>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn worst(&self) -> f64 {
        self.max_rel_error.iter().fold(0.0, |m, &v| m.max(v))
    }

    pub fn passed(&self) -> bool {
        self.worst() < self.tolerance
    }
}

/// Relative error floor; differences between gradients smaller than this
/// in magnitude are measured absolutely.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares analytic gradients of a scalar graph against central finite
/// differences.
///
/// `build` receives a fresh graph and the parameter nodes (inserted with
/// [`Graph::param`] in the order of `params`) and returns the scalar loss.
pub fn grad_check<F>(build: F, params: &[Tensor], step: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    if !(step > 0.0) {
        return Err(arg_err!("finite-difference step must be positive, got {}", step));
    }
    let eval = |ps: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = ps.iter().map(|p| g.param(p.clone())).collect();
        let root = build(&mut g, &ids)?;
        let v = g.value(root);
        if v.len() != 1 || !v.item().is_finite() {
            return Err(Error::Numerical(String::from("loss is not a finite scalar")));
        }
        Ok(v.item())
    };

    let mut g = Graph::new();
    let ids: Vec<NodeId> = params.iter().map(|p| g.param(p.clone())).collect();
    let root = build(&mut g, &ids)?;
    if !g.value(root).item().is_finite() {
        return Err(Error::Numerical(String::from("loss is not finite")));
    }
    g.backward(root)?;

    let mut work: Vec<Tensor> = params.to_vec();
    let mut report = Vec::with_capacity(params.len());
    for (b, id) in ids.iter().enumerate() {
        let analytic = g
            .grad(*id)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(params[b].shape()));
        let mut worst = 0.0f64;
        for e in 0..params[b].len() {
            let orig = params[b].data()[e];
            work[b].data_mut()[e] = orig + step;
            let plus = eval(&work)?;
            work[b].data_mut()[e] = orig - step;
            let minus = eval(&work)?;
            work[b].data_mut()[e] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            worst = worst.max(relative_error(analytic.data()[e], numeric));
        }
        report.push(worst);
    }
    Ok(GradCheckReport {
        max_rel_error: report,
        tolerance: tol,
    })
}
