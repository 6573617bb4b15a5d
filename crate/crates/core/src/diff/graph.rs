//! Tape-style compute graph over [`Tensor`] values.
//!
//! Nodes evaluate eagerly as they are pushed, and every push runs the
//! non-finite guard, so a NaN or Inf surfaces at the op that produced it
//! instead of propagating. The backward pass builds *new graph nodes* for
//! the gradients rather than bare tensors; differentiating an expression
//! that contains gradient nodes (the gradient-penalty term needs this) is
//! then just a second backward pass over the extended graph.

use std::sync::Arc;

use super::tensor::Tensor;
use crate::error::{Error, Result};

pub type NodeId = usize;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul,
    Transpose,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Scale(f64),
    AddScalar,
    SumRows,
    SumCols,
    BroadcastRows,
    BroadcastCols,
    Relu,
    LeakyRelu(f64),
    /// 1 where the input is > 0, `slope` elsewhere. The derivative of the
    /// relu family; contributes no gradient of its own (zero a.e.).
    ActMask,
    Sqrt,
    /// 1/x where x > 0, 0 elsewhere. Backs the guarded sqrt derivative so
    /// a zero-norm row takes subgradient 0 instead of dividing by zero.
    RecipOrZero,
    Exp,
    /// Per row and per block span, replace each entry with the block sum.
    BlockRowSumBcast(Arc<Vec<(usize, usize)>>),
    SliceCols {
        start: usize,
    },
    EmbedCols {
        start: usize,
    },
    GatherRows(Arc<Vec<usize>>),
    ScatterAddRows(Arc<Vec<usize>>),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul => "matmul",
            Op::Transpose => "transpose",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Div => "div",
            Op::Neg => "neg",
            Op::Scale(_) => "scale",
            Op::AddScalar => "add_scalar",
            Op::SumRows => "sum_rows",
            Op::SumCols => "sum_cols",
            Op::BroadcastRows => "broadcast_rows",
            Op::BroadcastCols => "broadcast_cols",
            Op::Relu => "relu",
            Op::LeakyRelu(_) => "leaky_relu",
            Op::ActMask => "act_mask",
            Op::Sqrt => "sqrt",
            Op::RecipOrZero => "recip_or_zero",
            Op::Exp => "exp",
            Op::BlockRowSumBcast(_) => "block_row_sum_bcast",
            Op::SliceCols { .. } => "slice_cols",
            Op::EmbedCols { .. } => "embed_cols",
            Op::GatherRows(_) => "gather_rows",
            Op::ScatterAddRows(_) => "scatter_add_rows",
        }
    }
}

struct Node {
    op: Op,
    inputs: Vec<NodeId>,
    value: Tensor,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id].value.scalar_value()
    }

    fn push(&mut self, op: Op, inputs: Vec<NodeId>, value: Tensor) -> Result<NodeId> {
        if !value.all_finite() {
            return Err(Error::NonFinite {
                context: format!("graph op {}", op.name()),
            });
        }
        self.nodes.push(Node { op, inputs, value });
        Ok(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor) -> Result<NodeId> {
        self.push(Op::Leaf, vec![], value)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.nodes[a].value.matmul(&self.nodes[b].value)?;
        self.push(Op::MatMul, vec![a, b], value)
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.nodes[a].value.transpose();
        self.push(Op::Transpose, vec![a], value)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.nodes[a].value.add(&self.nodes[b].value)?;
        self.push(Op::Add, vec![a, b], value)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.nodes[a].value.sub(&self.nodes[b].value)?;
        self.push(Op::Sub, vec![a, b], value)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.nodes[a].value.mul_elem(&self.nodes[b].value)?;
        self.push(Op::Mul, vec![a, b], value)
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.nodes[a].value.div_elem(&self.nodes[b].value)?;
        self.push(Op::Div, vec![a, b], value)
    }

    pub fn neg(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.nodes[a].value.neg();
        self.push(Op::Neg, vec![a], value)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        let value = self.nodes[a].value.scale(c);
        self.push(Op::Scale(c), vec![a], value)
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        let value = self.nodes[a].value.add_scalar(c);
        self.push(Op::AddScalar, vec![a], value)
    }

    pub fn sum_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.nodes[a].value.sum_rows();
        self.push(Op::SumRows, vec![a], value)
    }

    pub fn sum_cols(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.nodes[a].value.sum_cols();
        self.push(Op::SumCols, vec![a], value)
    }

    pub fn broadcast_rows(&mut self, a: NodeId, n: usize) -> Result<NodeId> {
        let value = self.nodes[a].value.broadcast_rows(n)?;
        self.push(Op::BroadcastRows, vec![a], value)
    }

    pub fn broadcast_cols(&mut self, a: NodeId, d: usize) -> Result<NodeId> {
        let value = self.nodes[a].value.broadcast_cols(d)?;
        self.push(Op::BroadcastCols, vec![a], value)
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.nodes[a].value.map(|v| v.max(0.0));
        self.push(Op::Relu, vec![a], value)
    }

    pub fn leaky_relu(&mut self, a: NodeId, slope: f64) -> Result<NodeId> {
        let value = self.nodes[a].value.map(|v| if v > 0.0 { v } else { slope * v });
        self.push(Op::LeakyRelu(slope), vec![a], value)
    }

    fn act_mask(&mut self, a: NodeId, slope: f64) -> Result<NodeId> {
        let value = self.nodes[a].value.map(|v| if v > 0.0 { 1.0 } else { slope });
        self.push(Op::ActMask, vec![a], value)
    }

    pub fn sqrt(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.nodes[a].value.map(f64::sqrt);
        self.push(Op::Sqrt, vec![a], value)
    }

    pub fn recip_or_zero(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.nodes[a].value.map(|v| if v > 0.0 { 1.0 / v } else { 0.0 });
        self.push(Op::RecipOrZero, vec![a], value)
    }

    pub fn exp(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.nodes[a].value.map(f64::exp);
        self.push(Op::Exp, vec![a], value)
    }

    pub fn block_row_sum_bcast(
        &mut self,
        a: NodeId,
        blocks: Arc<Vec<(usize, usize)>>,
    ) -> Result<NodeId> {
        let t = &self.nodes[a].value;
        let mut out = t.clone();
        for r in 0..t.rows() {
            for &(start, len) in blocks.iter() {
                let sum: f64 = t.row(r)[start..start + len].iter().sum();
                for c in start..start + len {
                    out.set(r, c, sum);
                }
            }
        }
        self.push(Op::BlockRowSumBcast(blocks), vec![a], out)
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let t = &self.nodes[a].value;
        if start + len > t.cols() {
            return Err(Error::Shape(format!(
                "slice [{start}, {}) out of width {}",
                start + len,
                t.cols()
            )));
        }
        let mut data = Vec::with_capacity(t.rows() * len);
        for r in 0..t.rows() {
            data.extend_from_slice(&t.row(r)[start..start + len]);
        }
        let value = Tensor::from_vec(t.rows(), len, data);
        self.push(Op::SliceCols { start }, vec![a], value)
    }

    pub fn embed_cols(&mut self, a: NodeId, start: usize, width: usize) -> Result<NodeId> {
        let t = &self.nodes[a].value;
        if start + t.cols() > width {
            return Err(Error::Shape(format!(
                "embed of width {} at {start} exceeds target width {width}",
                t.cols()
            )));
        }
        let mut out = Tensor::zeros(t.rows(), width);
        for r in 0..t.rows() {
            for c in 0..t.cols() {
                out.set(r, start + c, t.get(r, c));
            }
        }
        self.push(Op::EmbedCols { start }, vec![a], out)
    }

    pub fn gather_rows(&mut self, a: NodeId, indices: Arc<Vec<usize>>) -> Result<NodeId> {
        let t = &self.nodes[a].value;
        let mut data = Vec::with_capacity(indices.len() * t.cols());
        for &i in indices.iter() {
            if i >= t.rows() {
                return Err(Error::Shape(format!(
                    "gather index {i} out of {} rows",
                    t.rows()
                )));
            }
            data.extend_from_slice(t.row(i));
        }
        let value = Tensor::from_vec(indices.len(), t.cols(), data);
        self.push(Op::GatherRows(indices), vec![a], value)
    }

    pub fn scatter_add_rows(
        &mut self,
        a: NodeId,
        indices: Arc<Vec<usize>>,
        n_rows: usize,
    ) -> Result<NodeId> {
        let t = &self.nodes[a].value;
        if indices.len() != t.rows() {
            return Err(Error::Shape(format!(
                "scatter needs one index per row: {} vs {}",
                indices.len(),
                t.rows()
            )));
        }
        let mut out = Tensor::zeros(n_rows, t.cols());
        for (j, &i) in indices.iter().enumerate() {
            for c in 0..t.cols() {
                let cur = out.get(i, c);
                out.set(i, c, cur + t.get(j, c));
            }
        }
        self.push(Op::ScatterAddRows(indices), vec![a], out)
    }

    /// Gradients of a scalar output with respect to `wrt`, materialized as
    /// graph nodes so they can be differentiated again. Nodes that do not
    /// influence the output get a zero gradient of their own shape.
    pub fn grad_nodes(&mut self, output: NodeId, wrt: &[NodeId]) -> Result<Vec<NodeId>> {
        if !self.nodes[output].value.is_scalar() {
            return Err(Error::Contract(format!(
                "grad requires a scalar output, got shape {:?}",
                self.nodes[output].value.shape()
            )));
        }
        let mut grads: Vec<Option<NodeId>> = vec![None; output + 1];
        let seed = self.leaf(Tensor::scalar(1.0))?;
        grads[output] = Some(seed);

        for id in (0..=output).rev() {
            let g = match grads[id] {
                Some(g) => g,
                None => continue,
            };
            let op = self.nodes[id].op.clone();
            let inputs = self.nodes[id].inputs.clone();
            let contribs: Vec<(NodeId, NodeId)> = match op {
                Op::Leaf | Op::ActMask => vec![],
                Op::MatMul => {
                    let (a, b) = (inputs[0], inputs[1]);
                    let bt = self.transpose(b)?;
                    let da = self.matmul(g, bt)?;
                    let at = self.transpose(a)?;
                    let db = self.matmul(at, g)?;
                    vec![(a, da), (b, db)]
                }
                Op::Transpose => {
                    let da = self.transpose(g)?;
                    vec![(inputs[0], da)]
                }
                Op::Add => vec![(inputs[0], g), (inputs[1], g)],
                Op::Sub => {
                    let db = self.neg(g)?;
                    vec![(inputs[0], g), (inputs[1], db)]
                }
                Op::Mul => {
                    let (a, b) = (inputs[0], inputs[1]);
                    let da = self.mul(g, b)?;
                    let db = self.mul(g, a)?;
                    vec![(a, da), (b, db)]
                }
                Op::Div => {
                    let (a, b) = (inputs[0], inputs[1]);
                    let da = self.div(g, b)?;
                    // d(a/b)/db = -(a/b)/b, reusing this node's value.
                    let q_over_b = self.div(id, b)?;
                    let neg_q = self.neg(q_over_b)?;
                    let db = self.mul(g, neg_q)?;
                    vec![(a, da), (b, db)]
                }
                Op::Neg => {
                    let da = self.neg(g)?;
                    vec![(inputs[0], da)]
                }
                Op::Scale(c) => {
                    let da = self.scale(g, c)?;
                    vec![(inputs[0], da)]
                }
                Op::AddScalar => vec![(inputs[0], g)],
                Op::SumRows => {
                    let n = self.nodes[inputs[0]].value.rows();
                    let da = self.broadcast_rows(g, n)?;
                    vec![(inputs[0], da)]
                }
                Op::SumCols => {
                    let d = self.nodes[inputs[0]].value.cols();
                    let da = self.broadcast_cols(g, d)?;
                    vec![(inputs[0], da)]
                }
                Op::BroadcastRows => {
                    let da = self.sum_rows(g)?;
                    vec![(inputs[0], da)]
                }
                Op::BroadcastCols => {
                    let da = self.sum_cols(g)?;
                    vec![(inputs[0], da)]
                }
                Op::Relu => {
                    let mask = self.act_mask(inputs[0], 0.0)?;
                    let da = self.mul(g, mask)?;
                    vec![(inputs[0], da)]
                }
                Op::LeakyRelu(slope) => {
                    let mask = self.act_mask(inputs[0], slope)?;
                    let da = self.mul(g, mask)?;
                    vec![(inputs[0], da)]
                }
                Op::Sqrt => {
                    // d sqrt(x)/dx = 1/(2 sqrt(x)), subgradient 0 at 0.
                    let r = self.recip_or_zero(id)?;
                    let half = self.scale(r, 0.5)?;
                    let da = self.mul(g, half)?;
                    vec![(inputs[0], da)]
                }
                Op::RecipOrZero => {
                    // d(1/x)/dx = -1/x^2 where x > 0, else 0.
                    let sq = self.mul(id, id)?;
                    let neg_sq = self.neg(sq)?;
                    let da = self.mul(g, neg_sq)?;
                    vec![(inputs[0], da)]
                }
                Op::Exp => {
                    let da = self.mul(g, id)?;
                    vec![(inputs[0], da)]
                }
                Op::BlockRowSumBcast(blocks) => {
                    let da = self.block_row_sum_bcast(g, blocks)?;
                    vec![(inputs[0], da)]
                }
                Op::SliceCols { start, .. } => {
                    let width = self.nodes[inputs[0]].value.cols();
                    let da = self.embed_cols(g, start, width)?;
                    vec![(inputs[0], da)]
                }
                Op::EmbedCols { start, .. } => {
                    let len = self.nodes[inputs[0]].value.cols();
                    let da = self.slice_cols(g, start, len)?;
                    vec![(inputs[0], da)]
                }
                Op::GatherRows(indices) => {
                    let n = self.nodes[inputs[0]].value.rows();
                    let da = self.scatter_add_rows(g, indices, n)?;
                    vec![(inputs[0], da)]
                }
                Op::ScatterAddRows(indices) => {
                    let da = self.gather_rows(g, indices)?;
                    vec![(inputs[0], da)]
                }
            };
            for (input, contrib) in contribs {
                grads[input] = Some(match grads[input] {
                    Some(existing) => self.add(existing, contrib)?,
                    None => contrib,
                });
            }
        }

        let mut out = Vec::with_capacity(wrt.len());
        for &w in wrt {
            match grads.get(w).copied().flatten() {
                Some(gid) => out.push(gid),
                None => {
                    let shape = self.nodes[w].value.shape();
                    out.push(self.leaf(Tensor::zeros(shape.0, shape.1))?);
                }
            }
        }
        Ok(out)
    }

    /// Gradient tensors of a scalar output with respect to `wrt`.
    pub fn grad(&mut self, output: NodeId, wrt: &[NodeId]) -> Result<Vec<Tensor>> {
        let ids = self.grad_nodes(output, wrt)?;
        Ok(ids.into_iter().map(|id| self.nodes[id].value.clone()).collect())
    }
}
