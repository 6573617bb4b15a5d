//! Layer-level composites over the graph primitives. Everything here is
//! built from differentiable primitives, so first- and second-order
//! gradients come from the same backward machinery.

use std::sync::Arc;

use rand::Rng;

use super::graph::{Graph, NodeId};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// y = x W + b with the bias broadcast per row.
pub fn linear(g: &mut Graph, x: NodeId, weight: NodeId, bias: NodeId) -> Result<NodeId> {
    let n = g.value(x).rows();
    let mm = g.matmul(x, weight)?;
    let b = g.broadcast_rows(bias, n)?;
    g.add(mm, b)
}

/// Mean over all entries as a scalar node.
pub fn mean_all(g: &mut Graph, a: NodeId) -> Result<NodeId> {
    let (rows, cols) = g.value(a).shape();
    let s1 = g.sum_rows(a)?;
    let s2 = g.sum_cols(s1)?;
    g.scale(s2, 1.0 / (rows * cols) as f64)
}

/// Per-row Euclidean norm: (n, d) -> (n, 1).
pub fn row_norms(g: &mut Graph, x: NodeId) -> Result<NodeId> {
    let sq = g.mul(x, x)?;
    let sums = g.sum_cols(sq)?;
    g.sqrt(sums)
}

/// clamp(x, lo, hi) = lo + relu(x - lo) - relu(x - hi), piecewise linear
/// with unit slope inside the bounds and zero outside.
pub fn clamp(g: &mut Graph, x: NodeId, lo: f64, hi: f64) -> Result<NodeId> {
    let above_lo = g.add_scalar(x, -lo)?;
    let r1 = g.relu(above_lo)?;
    let above_hi = g.add_scalar(x, -hi)?;
    let r2 = g.relu(above_hi)?;
    let span = g.sub(r1, r2)?;
    g.add_scalar(span, lo)
}

/// |x| = relu(x) + relu(-x).
pub fn abs_val(g: &mut Graph, x: NodeId) -> Result<NodeId> {
    let pos = g.relu(x)?;
    let neg_x = g.neg(x)?;
    let neg = g.relu(neg_x)?;
    g.add(pos, neg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    Train,
    Eval,
}

/// Batch-norm running statistics, one (1, d) row each.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Tensor,
    pub var: Tensor,
}

impl RunningStats {
    pub fn identity(width: usize) -> Self {
        RunningStats {
            mean: Tensor::zeros(1, width),
            var: Tensor::filled(1, width, 1.0),
        }
    }
}

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

/// Batch normalization with affine parameters. Train mode normalizes by
/// the biased batch statistics and folds the unbiased variance into the
/// running stats with `momentum` weight on the old value; eval mode
/// normalizes by the running stats.
pub fn batch_norm(
    g: &mut Graph,
    x: NodeId,
    gamma: NodeId,
    beta: NodeId,
    mode: BnMode,
    stats: &mut RunningStats,
    momentum: f64,
    eps: f64,
) -> Result<NodeId> {
    let (n, d) = g.value(x).shape();
    match mode {
        BnMode::Train => {
            if n < 2 {
                return Err(Error::DegenerateBatch(format!(
                    "batch normalization needs at least 2 rows in train mode, got {n}"
                )));
            }
            let sums = g.sum_rows(x)?;
            let mu = g.scale(sums, 1.0 / n as f64)?;
            let mu_b = g.broadcast_rows(mu, n)?;
            let xc = g.sub(x, mu_b)?;
            let sq = g.mul(xc, xc)?;
            let var_sums = g.sum_rows(sq)?;
            let var = g.scale(var_sums, 1.0 / n as f64)?;
            let var_eps = g.add_scalar(var, eps)?;
            let std = g.sqrt(var_eps)?;
            let inv = g.recip_or_zero(std)?;
            let inv_b = g.broadcast_rows(inv, n)?;
            let xn = g.mul(xc, inv_b)?;
            let gamma_b = g.broadcast_rows(gamma, n)?;
            let beta_b = g.broadcast_rows(beta, n)?;
            let scaled = g.mul(xn, gamma_b)?;
            let y = g.add(scaled, beta_b)?;

            let unbias = n as f64 / (n - 1) as f64;
            let mu_val = g.value(mu).clone();
            let var_val = g.value(var).scale(unbias);
            for c in 0..d {
                let m_new = momentum * stats.mean.get(0, c) + (1.0 - momentum) * mu_val.get(0, c);
                let v_new = momentum * stats.var.get(0, c) + (1.0 - momentum) * var_val.get(0, c);
                stats.mean.set(0, c, m_new);
                stats.var.set(0, c, v_new);
            }
            Ok(y)
        }
        BnMode::Eval => {
            let mean_leaf = g.leaf(stats.mean.clone())?;
            let inv = stats.var.map(|v| 1.0 / (v + eps).sqrt());
            let inv_leaf = g.leaf(inv)?;
            let mean_b = g.broadcast_rows(mean_leaf, n)?;
            let xm = g.sub(x, mean_b)?;
            let inv_b = g.broadcast_rows(inv_leaf, n)?;
            let xn = g.mul(xm, inv_b)?;
            let gamma_b = g.broadcast_rows(gamma, n)?;
            let beta_b = g.broadcast_rows(beta, n)?;
            let scaled = g.mul(xn, gamma_b)?;
            g.add(scaled, beta_b)
        }
    }
}

/// Gumbel-softmax over contiguous column blocks: softmax((logits + noise)
/// / temperature) within each block. The noise tensor is held fixed, so
/// the output is differentiable in the logits; the per-block max shift is
/// treated as constant, which is exact because softmax is shift-invariant.
pub fn gumbel_softmax(
    g: &mut Graph,
    logits: NodeId,
    blocks: Arc<Vec<(usize, usize)>>,
    temperature: f64,
    noise: &Tensor,
) -> Result<NodeId> {
    if temperature <= 0.0 {
        return Err(Error::Contract(format!(
            "gumbel softmax temperature must be positive, got {temperature}"
        )));
    }
    if g.value(logits).shape() != noise.shape() {
        return Err(Error::Shape(format!(
            "noise shape {:?} does not match logits {:?}",
            noise.shape(),
            g.value(logits).shape()
        )));
    }
    let noise_leaf = g.leaf(noise.clone())?;
    let shifted = g.add(logits, noise_leaf)?;
    let scaled = g.scale(shifted, 1.0 / temperature)?;

    let v = g.value(scaled);
    let mut maxes = v.clone();
    for r in 0..v.rows() {
        for &(start, len) in blocks.iter() {
            let m = v.row(r)[start..start + len]
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            for c in start..start + len {
                maxes.set(r, c, m);
            }
        }
    }
    let max_leaf = g.leaf(maxes)?;
    let centered = g.sub(scaled, max_leaf)?;
    let exps = g.exp(centered)?;
    let denom = g.block_row_sum_bcast(exps, blocks)?;
    g.div(exps, denom)
}

/// WGAN-GP gradient penalty mean((||grad_x C(x_interp)||_2 - 1)^2) as a
/// differentiable node. The critic closure must score rows independently
/// so the gradient of the score sum recovers the per-row input gradients.
pub fn gradient_penalty<F>(g: &mut Graph, interpolates: NodeId, critic: F) -> Result<NodeId>
where
    F: FnOnce(&mut Graph, NodeId) -> Result<NodeId>,
{
    let scores = critic(g, interpolates)?;
    if g.value(scores).cols() != 1 {
        return Err(Error::Contract(format!(
            "critic must produce (n, 1) scores, got {:?}",
            g.value(scores).shape()
        )));
    }
    let total = g.sum_rows(scores)?;
    let input_grad = g.grad_nodes(total, &[interpolates])?[0];
    let norms = row_norms(g, input_grad)?;
    let shifted = g.add_scalar(norms, -1.0)?;
    let sq = g.mul(shifted, shifted)?;
    mean_all(g, sq)
}

/// z ~ N(0, 1) via Box-Muller; consumes exactly two uniforms per pair.
pub fn standard_normal<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let len = rows * cols;
    let mut data = Vec::with_capacity(len + 1);
    while data.len() < len {
        let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
        let u2: f64 = rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        data.push(r * theta.cos());
        data.push(r * theta.sin());
    }
    data.truncate(len);
    Tensor::from_vec(rows, cols, data)
}

/// Uniform draws on [0, 1).
pub fn standard_uniform<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.gen::<f64>()).collect();
    Tensor::from_vec(rows, cols, data)
}

/// Gumbel(0, 1) noise: -ln(-ln(u)), with u kept away from {0, 1}.
pub fn gumbel_noise<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| {
            let u: f64 = rng.gen::<f64>().clamp(1e-12, 1.0 - 1e-12);
            -(-u.ln()).ln()
        })
        .collect();
    Tensor::from_vec(rows, cols, data)
}
