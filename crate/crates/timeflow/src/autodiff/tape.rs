//! Define-by-run reverse-mode differentiation with support for
//! differentiating through gradients.
//!
//! Every operation appends a [`Node`] to an append-only tape, so node
//! creation order is a topological order and a single reverse sweep
//! propagates adjoints. The decisive feature is `create_graph`: when set,
//! [`Tape::backward`] expresses each adjoint as further tape operations
//! instead of raw buffers, so a later backward pass differentiates through
//! the first one. That is what lets an outer optimization see how a code
//! was produced by inner gradient steps rather than treating it as a
//! constant.
//!
//! The op set is deliberately closed under differentiation: every operation
//! used by a backward rule (transposes, outer products, row reductions,
//! step masks, ...) has a backward rule of its own, so nesting works to any
//! order.
//!
//! Broadcasting is restricted to the two patterns the model needs — exact
//! shape match and a row vector applied to each matrix row. Anything else
//! is a dimension error.

use std::collections::HashMap;

use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`]. Only meaningful for the tape that
/// produced it; invalidated by [`Tape::truncate`] if at or past the mark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// Elementwise a + b, exact shapes.
    Add(NodeId, NodeId),
    /// Matrix + row vector, added to every row.
    AddRow(NodeId, NodeId),
    Sub(NodeId, NodeId),
    /// Matrix − row vector, subtracted from every row.
    SubRow(NodeId, NodeId),
    Mul(NodeId, NodeId),
    /// Matrix ⊙ row vector, multiplied into every row.
    MulRow(NodeId, NodeId),
    /// a * c for a compile-time-constant scalar c.
    Scale(NodeId, f64),
    Matmul(NodeId, NodeId),
    /// Matrix · vector → vector.
    MatVec(NodeId, NodeId),
    /// Outer product of two vectors → matrix.
    Outer(NodeId, NodeId),
    Transpose(NodeId),
    Relu(NodeId),
    /// 1 where the argument is > 0, else 0. Gradient is zero everywhere:
    /// this is the (a.e. 0) derivative carrier for Relu's backward.
    StepMask(NodeId),
    Sin(NodeId),
    Cos(NodeId),
    /// Sum of all entries → scalar.
    SumAll(NodeId),
    /// Column sums of a matrix → row vector.
    SumRows(NodeId),
    /// Row vector repeated over matrix rows.
    RepeatRows(NodeId),
    /// Scalar broadcast to an arbitrary shape.
    BroadcastScalar(NodeId),
    Reshape(NodeId),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// Gradients returned by [`Tape::backward`], keyed by the requested nodes.
pub type GradMap = HashMap<NodeId, NodeId>;

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drop every node at or past `mark`. Handles created after the mark
    /// must not be used again.
    pub fn truncate(&mut self, mark: usize) {
        self.nodes.truncate(mark);
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn requires_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    /// Record an input. `requires_grad` marks it as a differentiation target.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> NodeId {
        self.push(Op::Leaf, value, requires_grad)
    }

    /// Record a non-differentiable input (targets, embeddings, constants).
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value, false)
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, value, requires_grad });
        id
    }

    fn rg2(&self, a: NodeId, b: NodeId) -> bool {
        self.nodes[a.0].requires_grad || self.nodes[b.0].requires_grad
    }

    fn rg1(&self, a: NodeId) -> bool {
        self.nodes[a.0].requires_grad
    }

    /// Minimum |x| over the inputs of every Relu recorded so far. Used by
    /// finite-difference tests to reject cases that straddle a kink.
    pub fn min_abs_relu_input(&self) -> f64 {
        let mut m = f64::INFINITY;
        for node in &self.nodes {
            if let Op::Relu(a) = node.op {
                for v in self.nodes[a.0].value.data() {
                    m = m.min(v.abs());
                }
            }
        }
        m
    }

    // ── elementwise ops ──────────────────────────────────────────────

    /// a + b: exact shapes, or matrix + row vector.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.broadcasting_binop("add", a, b, |x, y| x + y)
    }

    /// a − b: exact shapes, or matrix − row vector.
    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.broadcasting_binop("sub", a, b, |x, y| x - y)
    }

    /// a ⊙ b: exact shapes, or matrix ⊙ row vector.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.broadcasting_binop("mul", a, b, |x, y| x * y)
    }

    fn broadcasting_binop(
        &mut self,
        name: &'static str,
        a: NodeId,
        b: NodeId,
        f: fn(f64, f64) -> f64,
    ) -> Result<NodeId> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if va.shape() == vb.shape() {
            let data = va.data().iter().zip(vb.data()).map(|(x, y)| f(*x, *y)).collect();
            let value = Tensor::new(va.shape().to_vec(), data)?;
            let op = match name {
                "add" => Op::Add(a, b),
                "sub" => Op::Sub(a, b),
                _ => Op::Mul(a, b),
            };
            let rg = self.rg2(a, b);
            return Ok(self.push(op, value, rg));
        }
        // matrix ∘ row-vector broadcast
        if va.is_matrix() && vb.is_vector() && va.cols() == vb.len() {
            let (rows, cols) = (va.rows(), va.cols());
            let mut data = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                let row = &va.data()[r * cols..(r + 1) * cols];
                for (x, y) in row.iter().zip(vb.data()) {
                    data.push(f(*x, *y));
                }
            }
            let value = Tensor::matrix(rows, cols, data)?;
            let op = match name {
                "add" => Op::AddRow(a, b),
                "sub" => Op::SubRow(a, b),
                _ => Op::MulRow(a, b),
            };
            let rg = self.rg2(a, b);
            return Ok(self.push(op, value, rg));
        }
        Err(Error::Dimension {
            op: name,
            detail: format!("incompatible shapes {:?} and {:?}", va.shape(), vb.shape()),
        })
    }

    /// a * c for a constant scalar.
    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let va = &self.nodes[a.0].value;
        let value = Tensor::new(va.shape().to_vec(), va.data().iter().map(|x| x * c).collect())
            .expect("same shape");
        let rg = self.rg1(a);
        self.push(Op::Scale(a, c), value, rg)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let va = &self.nodes[a.0].value;
        let value = Tensor::new(va.shape().to_vec(), va.data().iter().map(|x| x.max(0.0)).collect())
            .expect("same shape");
        let rg = self.rg1(a);
        self.push(Op::Relu(a), value, rg)
    }

    fn step_mask(&mut self, a: NodeId) -> NodeId {
        let va = &self.nodes[a.0].value;
        let data = va.data().iter().map(|x| if *x > 0.0 { 1.0 } else { 0.0 }).collect();
        let value = Tensor::new(va.shape().to_vec(), data).expect("same shape");
        // the step function is flat a.e., so nothing flows through it
        self.push(Op::StepMask(a), value, false)
    }

    pub fn sin(&mut self, a: NodeId) -> NodeId {
        let va = &self.nodes[a.0].value;
        let value = Tensor::new(va.shape().to_vec(), va.data().iter().map(|x| x.sin()).collect())
            .expect("same shape");
        let rg = self.rg1(a);
        self.push(Op::Sin(a), value, rg)
    }

    pub fn cos(&mut self, a: NodeId) -> NodeId {
        let va = &self.nodes[a.0].value;
        let value = Tensor::new(va.shape().to_vec(), va.data().iter().map(|x| x.cos()).collect())
            .expect("same shape");
        let rg = self.rg1(a);
        self.push(Op::Cos(a), value, rg)
    }

    // ── linear algebra ───────────────────────────────────────────────

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if !va.is_matrix() || !vb.is_matrix() || va.cols() != vb.rows() {
            return Err(Error::Dimension {
                op: "matmul",
                detail: format!("cannot multiply {:?} by {:?}", va.shape(), vb.shape()),
            });
        }
        let (m, k, n) = (va.rows(), va.cols(), vb.cols());
        let mut data = vec![0.0; m * n];
        let (da, db) = (va.data(), vb.data());
        for i in 0..m {
            let arow = &da[i * k..(i + 1) * k];
            let out = &mut data[i * n..(i + 1) * n];
            for (p, &aip) in arow.iter().enumerate() {
                let brow = &db[p * n..(p + 1) * n];
                for (o, &bpj) in out.iter_mut().zip(brow) {
                    *o += aip * bpj;
                }
            }
        }
        let value = Tensor::matrix(m, n, data)?;
        let rg = self.rg2(a, b);
        Ok(self.push(Op::Matmul(a, b), value, rg))
    }

    /// Matrix · vector → vector.
    pub fn matvec(&mut self, a: NodeId, x: NodeId) -> Result<NodeId> {
        let (va, vx) = (&self.nodes[a.0].value, &self.nodes[x.0].value);
        if !va.is_matrix() || !vx.is_vector() || va.cols() != vx.len() {
            return Err(Error::Dimension {
                op: "matvec",
                detail: format!("cannot apply {:?} to {:?}", va.shape(), vx.shape()),
            });
        }
        let (m, k) = (va.rows(), va.cols());
        let mut data = vec![0.0; m];
        for i in 0..m {
            let row = &va.data()[i * k..(i + 1) * k];
            data[i] = row.iter().zip(vx.data()).map(|(p, q)| p * q).sum();
        }
        let rg = self.rg2(a, x);
        Ok(self.push(Op::MatVec(a, x), Tensor::vector(data), rg))
    }

    /// Outer product u ⊗ v of two vectors.
    pub fn outer(&mut self, u: NodeId, v: NodeId) -> Result<NodeId> {
        let (vu, vv) = (&self.nodes[u.0].value, &self.nodes[v.0].value);
        if !vu.is_vector() || !vv.is_vector() {
            return Err(Error::Dimension {
                op: "outer",
                detail: format!("needs two vectors, got {:?} and {:?}", vu.shape(), vv.shape()),
            });
        }
        let (m, n) = (vu.len(), vv.len());
        let mut data = Vec::with_capacity(m * n);
        for x in vu.data() {
            for y in vv.data() {
                data.push(x * y);
            }
        }
        let value = Tensor::matrix(m, n, data)?;
        let rg = self.rg2(u, v);
        Ok(self.push(Op::Outer(u, v), value, rg))
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        let va = &self.nodes[a.0].value;
        if !va.is_matrix() {
            return Err(Error::Dimension {
                op: "transpose",
                detail: format!("needs a matrix, got {:?}", va.shape()),
            });
        }
        let (m, n) = (va.rows(), va.cols());
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = va.data()[i * n + j];
            }
        }
        let value = Tensor::matrix(n, m, data)?;
        let rg = self.rg1(a);
        Ok(self.push(Op::Transpose(a), value, rg))
    }

    // ── reductions and shape ops ─────────────────────────────────────

    /// Sum of every entry → scalar.
    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let s: f64 = self.nodes[a.0].value.data().iter().sum();
        let rg = self.rg1(a);
        self.push(Op::SumAll(a), Tensor::scalar(s), rg)
    }

    /// Column sums of a matrix → row vector.
    pub fn sum_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let va = &self.nodes[a.0].value;
        if !va.is_matrix() {
            return Err(Error::Dimension {
                op: "sum_rows",
                detail: format!("needs a matrix, got {:?}", va.shape()),
            });
        }
        let (m, n) = (va.rows(), va.cols());
        let mut data = vec![0.0; n];
        for i in 0..m {
            for (acc, v) in data.iter_mut().zip(&va.data()[i * n..(i + 1) * n]) {
                *acc += v;
            }
        }
        let rg = self.rg1(a);
        Ok(self.push(Op::SumRows(a), Tensor::vector(data), rg))
    }

    /// Row vector stacked `rows` times into a matrix.
    pub fn repeat_rows(&mut self, v: NodeId, rows: usize) -> Result<NodeId> {
        let vv = &self.nodes[v.0].value;
        if !vv.is_vector() {
            return Err(Error::Dimension {
                op: "repeat_rows",
                detail: format!("needs a vector, got {:?}", vv.shape()),
            });
        }
        let n = vv.len();
        let mut data = Vec::with_capacity(rows * n);
        for _ in 0..rows {
            data.extend_from_slice(vv.data());
        }
        let value = Tensor::matrix(rows, n, data)?;
        let rg = self.rg1(v);
        Ok(self.push(Op::RepeatRows(v), value, rg))
    }

    /// Scalar broadcast to `shape`.
    pub fn broadcast_scalar(&mut self, s: NodeId, shape: &[usize]) -> Result<NodeId> {
        let vs = &self.nodes[s.0].value;
        if vs.len() != 1 {
            return Err(Error::Dimension {
                op: "broadcast_scalar",
                detail: format!("needs a scalar, got {:?}", vs.shape()),
            });
        }
        let n: usize = shape.iter().product();
        let value = Tensor::new(shape.to_vec(), vec![vs.item(); n])?;
        let rg = self.rg1(s);
        Ok(self.push(Op::BroadcastScalar(s), value, rg))
    }

    pub fn reshape(&mut self, a: NodeId, shape: &[usize]) -> Result<NodeId> {
        let va = &self.nodes[a.0].value;
        let value = Tensor::new(shape.to_vec(), va.data().to_vec())?;
        let rg = self.rg1(a);
        Ok(self.push(Op::Reshape(a), value, rg))
    }

    // ── losses ───────────────────────────────────────────────────────

    /// Mean squared error between a prediction node and a constant target.
    pub fn mse(&mut self, pred: NodeId, target: &Tensor) -> Result<NodeId> {
        let vp = &self.nodes[pred.0].value;
        if vp.is_empty() {
            return Err(Error::contract("mse over an empty coordinate set"));
        }
        if vp.len() != target.len() {
            return Err(Error::Dimension {
                op: "mse",
                detail: format!("prediction has {} entries, target {}", vp.len(), target.len()),
            });
        }
        let n = vp.len();
        let t = self.constant(Tensor::new(vp.shape().to_vec(), target.data().to_vec())?);
        let diff = self.sub(pred, t)?;
        let sq = self.mul(diff, diff)?;
        let total = self.sum_all(sq);
        Ok(self.scale(total, 1.0 / n as f64))
    }

    // ── reverse sweep ────────────────────────────────────────────────

    /// Propagate adjoints from the scalar `root` back to `wrt`.
    ///
    /// Returns, for each requested node, a node holding its gradient. With
    /// `create_graph` the gradient nodes stay connected to the graph that
    /// produced them, so they can themselves be differentiated; without it
    /// every intermediate of the sweep is discarded and the results are
    /// re-recorded as constants.
    ///
    /// A requested node the root does not depend on gets a zero gradient.
    /// Requested nodes must have `requires_grad`.
    pub fn backward(
        &mut self,
        root: NodeId,
        wrt: &[NodeId],
        create_graph: bool,
    ) -> Result<GradMap> {
        if self.nodes[root.0].value.len() != 1 {
            return Err(Error::contract(format!(
                "backward root must be scalar, got shape {:?}",
                self.nodes[root.0].value.shape()
            )));
        }
        for &w in wrt {
            if !self.nodes[w.0].requires_grad {
                return Err(Error::contract(
                    "backward target does not require gradients".to_string(),
                ));
            }
        }

        let mark = self.nodes.len();
        let mut adjoint: Vec<Option<NodeId>> = vec![None; root.0 + 1];
        let seed = self.constant(Tensor::ones(self.nodes[root.0].value.shape()));
        adjoint[root.0] = Some(seed);

        for i in (0..=root.0).rev() {
            let g = match adjoint[i] {
                Some(g) => g,
                None => continue,
            };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.propagate(NodeId(i), g, &mut adjoint)?;
        }

        let mut grads = GradMap::with_capacity(wrt.len());
        if create_graph {
            for &w in wrt {
                let g = match adjoint[w.0] {
                    Some(g) => g,
                    None => self.constant(Tensor::zeros(self.nodes[w.0].value.shape())),
                };
                grads.insert(w, g);
            }
        } else {
            // detach: capture values, drop the sweep's nodes, re-record as leaves
            let mut values = Vec::with_capacity(wrt.len());
            for &w in wrt {
                let v = match adjoint[w.0] {
                    Some(g) => self.nodes[g.0].value.clone(),
                    None => Tensor::zeros(self.nodes[w.0].value.shape()),
                };
                values.push(v);
            }
            self.truncate(mark);
            for (&w, v) in wrt.iter().zip(values) {
                grads.insert(w, self.constant(v));
            }
        }
        Ok(grads)
    }

    /// Push the adjoint `g` of node `id` into its parents.
    fn propagate(&mut self, id: NodeId, g: NodeId, adjoint: &mut Vec<Option<NodeId>>) -> Result<()> {
        match self.nodes[id.0].op.clone() {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(a, g, adjoint)?;
                self.accumulate(b, g, adjoint)?;
            }
            Op::AddRow(a, v) => {
                self.accumulate(a, g, adjoint)?;
                if self.rg1(v) {
                    let gv = self.sum_rows(g)?;
                    self.accumulate(v, gv, adjoint)?;
                }
            }
            Op::Sub(a, b) => {
                self.accumulate(a, g, adjoint)?;
                if self.rg1(b) {
                    let neg = self.scale(g, -1.0);
                    self.accumulate(b, neg, adjoint)?;
                }
            }
            Op::SubRow(a, v) => {
                self.accumulate(a, g, adjoint)?;
                if self.rg1(v) {
                    let gv = self.sum_rows(g)?;
                    let neg = self.scale(gv, -1.0);
                    self.accumulate(v, neg, adjoint)?;
                }
            }
            Op::Mul(a, b) => {
                if self.rg1(a) {
                    let ga = self.mul(g, b)?;
                    self.accumulate(a, ga, adjoint)?;
                }
                if self.rg1(b) {
                    let gb = self.mul(g, a)?;
                    self.accumulate(b, gb, adjoint)?;
                }
            }
            Op::MulRow(a, v) => {
                if self.rg1(a) {
                    let ga = self.mul(g, v)?; // row broadcast again
                    self.accumulate(a, ga, adjoint)?;
                }
                if self.rg1(v) {
                    let prod = self.mul(g, a)?;
                    let gv = self.sum_rows(prod)?;
                    self.accumulate(v, gv, adjoint)?;
                }
            }
            Op::Scale(a, c) => {
                if self.rg1(a) {
                    let ga = self.scale(g, c);
                    self.accumulate(a, ga, adjoint)?;
                }
            }
            Op::Matmul(a, b) => {
                if self.rg1(a) {
                    let bt = self.transpose(b)?;
                    let ga = self.matmul(g, bt)?;
                    self.accumulate(a, ga, adjoint)?;
                }
                if self.rg1(b) {
                    let at = self.transpose(a)?;
                    let gb = self.matmul(at, g)?;
                    self.accumulate(b, gb, adjoint)?;
                }
            }
            Op::MatVec(a, x) => {
                if self.rg1(a) {
                    let ga = self.outer(g, x)?;
                    self.accumulate(a, ga, adjoint)?;
                }
                if self.rg1(x) {
                    let at = self.transpose(a)?;
                    let gx = self.matvec(at, g)?;
                    self.accumulate(x, gx, adjoint)?;
                }
            }
            Op::Outer(u, v) => {
                if self.rg1(u) {
                    let gu = self.matvec(g, v)?;
                    self.accumulate(u, gu, adjoint)?;
                }
                if self.rg1(v) {
                    let gt = self.transpose(g)?;
                    let gv = self.matvec(gt, u)?;
                    self.accumulate(v, gv, adjoint)?;
                }
            }
            Op::Transpose(a) => {
                if self.rg1(a) {
                    let ga = self.transpose(g)?;
                    self.accumulate(a, ga, adjoint)?;
                }
            }
            Op::Relu(a) => {
                if self.rg1(a) {
                    let mask = self.step_mask(a);
                    let ga = self.mul(g, mask)?;
                    self.accumulate(a, ga, adjoint)?;
                }
            }
            Op::StepMask(a) => {
                // flat a.e.: nothing flows to the pre-activation
                debug_assert_eq!(self.nodes[a.0].value.len(), self.nodes[id.0].value.len());
            }
            Op::Sin(a) => {
                if self.rg1(a) {
                    let c = self.cos(a);
                    let ga = self.mul(g, c)?;
                    self.accumulate(a, ga, adjoint)?;
                }
            }
            Op::Cos(a) => {
                if self.rg1(a) {
                    let s = self.sin(a);
                    let prod = self.mul(g, s)?;
                    let ga = self.scale(prod, -1.0);
                    self.accumulate(a, ga, adjoint)?;
                }
            }
            Op::SumAll(a) => {
                if self.rg1(a) {
                    let shape = self.nodes[a.0].value.shape().to_vec();
                    let ga = self.broadcast_scalar(g, &shape)?;
                    self.accumulate(a, ga, adjoint)?;
                }
            }
            Op::SumRows(a) => {
                if self.rg1(a) {
                    let rows = self.nodes[a.0].value.rows();
                    let ga = self.repeat_rows(g, rows)?;
                    self.accumulate(a, ga, adjoint)?;
                }
            }
            Op::RepeatRows(v) => {
                if self.rg1(v) {
                    let gv = self.sum_rows(g)?;
                    self.accumulate(v, gv, adjoint)?;
                }
            }
            Op::BroadcastScalar(s) => {
                if self.rg1(s) {
                    let gs = self.sum_all(g);
                    self.accumulate(s, gs, adjoint)?;
                }
            }
            Op::Reshape(a) => {
                if self.rg1(a) {
                    let shape = self.nodes[a.0].value.shape().to_vec();
                    let ga = self.reshape(g, &shape)?;
                    self.accumulate(a, ga, adjoint)?;
                }
            }
        }
        Ok(())
    }

    fn accumulate(
        &mut self,
        target: NodeId,
        contribution: NodeId,
        adjoint: &mut Vec<Option<NodeId>>,
    ) -> Result<()> {
        if !self.rg1(target) {
            return Ok(());
        }
        adjoint[target.0] = Some(match adjoint[target.0] {
            None => contribution,
            Some(prev) => self.add(prev, contribution)?,
        });
        Ok(())
    }
}
