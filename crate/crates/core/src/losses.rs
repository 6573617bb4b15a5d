//! Loss terms for adversarial training: the critic objective with
//! gradient penalty, the adversarial generator term, and the privacy and
//! fairness penalties added to the generator during the phase window.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diff::graph::{Graph, NodeId};
use crate::diff::ops;
use crate::diff::tensor::Tensor;
use crate::error::{Error, Result};
use crate::networks::{Binding, CriticNet};

/// Pairing rule for the privacy penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PrivacyVariant {
    /// Pair each real batch row with the fake row at the same batch index.
    #[serde(rename = "L1")]
    PairedByIndex,
    /// Pair each real batch row with its nearest fake row.
    #[serde(rename = "L2")]
    NearestNeighbor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    /// Gradient penalty coefficient.
    pub lambda_gp: f64,
    /// Privacy loss weight.
    pub lambda_privacy: f64,
    /// Fairness loss weight.
    pub lambda_fairness: f64,
    pub privacy_variant: PrivacyVariant,
    /// Clamp bounds on the raw (unweighted) privacy term.
    pub privacy_clamp: (f64, f64),
    /// Clamp bounds on the raw (unweighted) fairness term.
    pub fairness_clamp: (f64, f64),
    /// Divide-by-zero guard in the fairness rates.
    pub epsilon: f64,
    /// Use the raw paired distance as the privacy term instead of the
    /// hinge relaxation, for fidelity experiments only.
    pub literal_privacy: bool,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_gp: 10.0,
            lambda_privacy: 0.2,
            lambda_fairness: 1.0,
            privacy_variant: PrivacyVariant::NearestNeighbor,
            privacy_clamp: (0.0, 5.0),
            fairness_clamp: (0.0, 1.0),
            epsilon: 1e-8,
            literal_privacy: false,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_gp < 0.0 || self.lambda_privacy < 0.0 || self.lambda_fairness < 0.0 {
            return Err(Error::Config("loss weights must be non-negative".into()));
        }
        if self.privacy_clamp.0 > self.privacy_clamp.1
            || self.fairness_clamp.0 > self.fairness_clamp.1
        {
            return Err(Error::Config("clamp bounds must satisfy lo <= hi".into()));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Per-training-row nearest-real-neighbor distances plus the feature
/// weights, precomputed once over the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReference {
    /// d_i for every training row, in row order.
    pub distances: Vec<f64>,
    /// Strictly positive feature weights, one per encoded column.
    pub weights: Vec<f64>,
    /// How many rows have d_i = 0 because they duplicate another row.
    pub duplicate_rows: usize,
}

/// The real rows of the current batch with their reference distances.
pub struct PrivacyBatch<'a> {
    pub real: &'a Tensor,
    pub distances: &'a [f64],
}

/// Encoded coordinates used by the fairness term: the privileged category
/// column of the sensitive block and the favorable category column of the
/// target block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FairnessBindings {
    pub privileged_col: usize,
    pub favorable_col: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct CriticLossTerms {
    pub loss: NodeId,
    pub mean_fake: f64,
    pub mean_real: f64,
    pub gradient_penalty: f64,
}

/// mean C(fake) - mean C(real) + lambda * penalty at per-row interpolates
/// e*real + (1-e)*fake.
pub fn critic_loss(
    g: &mut Graph,
    critic: &CriticNet,
    binding: &Binding,
    real: NodeId,
    fake: NodeId,
    e_rows: &Tensor,
    lambda_gp: f64,
) -> Result<CriticLossTerms> {
    let (n, d) = g.value(real).shape();
    if g.value(fake).shape() != (n, d) {
        return Err(Error::Shape(format!(
            "real {:?} vs fake {:?}",
            g.value(real).shape(),
            g.value(fake).shape()
        )));
    }
    if e_rows.shape() != (n, 1) {
        return Err(Error::Shape(format!(
            "interpolation coefficients must be ({n}, 1), got {:?}",
            e_rows.shape()
        )));
    }

    let scores_fake = critic.forward(g, binding, fake)?;
    let mean_fake = ops::mean_all(g, scores_fake)?;
    let scores_real = critic.forward(g, binding, real)?;
    let mean_real = ops::mean_all(g, scores_real)?;

    let e = g.leaf(e_rows.clone())?;
    let e_b = g.broadcast_cols(e, d)?;
    let neg_e = g.neg(e_b)?;
    let one_minus_e = g.add_scalar(neg_e, 1.0)?;
    let from_real = g.mul(e_b, real)?;
    let from_fake = g.mul(one_minus_e, fake)?;
    let interpolates = g.add(from_real, from_fake)?;

    let penalty = ops::gradient_penalty(g, interpolates, |g, x| critic.forward(g, binding, x))?;

    let diff = g.sub(mean_fake, mean_real)?;
    let weighted_penalty = g.scale(penalty, lambda_gp)?;
    let loss = g.add(diff, weighted_penalty)?;
    Ok(CriticLossTerms {
        loss,
        mean_fake: g.scalar(mean_fake),
        mean_real: g.scalar(mean_real),
        gradient_penalty: g.scalar(penalty),
    })
}

/// -mean C(fake).
pub fn generator_adv_loss(
    g: &mut Graph,
    critic: &CriticNet,
    binding: &Binding,
    fake: NodeId,
) -> Result<NodeId> {
    let scores = critic.forward(g, binding, fake)?;
    let mean = ops::mean_all(g, scores)?;
    g.neg(mean)
}

/// Nearest-fake pairing per real row: argmin over fake rows of the
/// weighted distance, ties to the lowest index.
pub fn nearest_fake_indices(real: &Tensor, fake: &Tensor, weights: &[f64]) -> Vec<usize> {
    use rayon::prelude::*;
    let pair_one = |i: usize| {
        let r = real.row(i);
        let mut best = 0usize;
        let mut best_dist = f64::INFINITY;
        for j in 0..fake.rows() {
            let f = fake.row(j);
            let mut acc = 0.0;
            for c in 0..r.len() {
                let d = weights[c] * (r[c] - f[c]);
                acc += d * d;
            }
            if acc < best_dist {
                best_dist = acc;
                best = j;
            }
        }
        best
    };
    if real.rows() * fake.rows() >= 1 << 12 {
        (0..real.rows()).into_par_iter().map(pair_one).collect()
    } else {
        (0..real.rows()).map(pair_one).collect()
    }
}

/// Privacy penalty: per real row i, hinge max(0, d_i - dist_i) against
/// its paired fake row, so the loss activates exactly when a synthetic
/// point sits closer to row i than row i's nearest real neighbor. The
/// batch mean is clamped and scaled by lambda_p.
pub fn privacy_loss(
    g: &mut Graph,
    fake: NodeId,
    batch: &PrivacyBatch,
    weights: &LossWeights,
) -> Result<NodeId> {
    let (n, d) = batch.real.shape();
    if batch.distances.len() != n {
        return Err(Error::Shape(format!(
            "{} reference distances for {n} real rows",
            batch.distances.len()
        )));
    }
    let ref_weights = vec![1.0; d];
    privacy_loss_weighted(g, fake, batch, &ref_weights, weights)
}

pub fn privacy_loss_weighted(
    g: &mut Graph,
    fake: NodeId,
    batch: &PrivacyBatch,
    feature_weights: &[f64],
    weights: &LossWeights,
) -> Result<NodeId> {
    let (n, d) = batch.real.shape();
    if g.value(fake).cols() != d {
        return Err(Error::Shape(format!(
            "fake width {} vs real width {d}",
            g.value(fake).cols()
        )));
    }

    let paired = match weights.privacy_variant {
        PrivacyVariant::PairedByIndex => {
            if g.value(fake).rows() != n {
                return Err(Error::Shape(format!(
                    "paired-by-index privacy needs equal batch sizes: {} vs {n}",
                    g.value(fake).rows()
                )));
            }
            fake
        }
        PrivacyVariant::NearestNeighbor => {
            let indices = nearest_fake_indices(batch.real, g.value(fake), feature_weights);
            g.gather_rows(fake, Arc::new(indices))?
        }
    };

    let real_leaf = g.leaf(batch.real.clone())?;
    let diff = g.sub(real_leaf, paired)?;
    let w_leaf = g.leaf(Tensor::from_vec(1, d, feature_weights.to_vec()))?;
    let w_b = g.broadcast_rows(w_leaf, n)?;
    let weighted = g.mul(w_b, diff)?;
    let dist = ops::row_norms(g, weighted)?;

    let raw = if weights.literal_privacy {
        let sq = g.mul(dist, dist)?;
        ops::mean_all(g, sq)?
    } else {
        let d_leaf = g.leaf(Tensor::from_vec(n, 1, batch.distances.to_vec()))?;
        let margin = g.sub(d_leaf, dist)?;
        let hinge = g.relu(margin)?;
        ops::mean_all(g, hinge)?
    };
    let clamped = ops::clamp(g, raw, weights.privacy_clamp.0, weights.privacy_clamp.1)?;
    g.scale(clamped, weights.lambda_privacy)
}

/// Fairness penalty: absolute difference of the soft favorable-outcome
/// rates of the two sensitive groups, computed from the generated blocks,
/// clamped and scaled by lambda_f. The epsilon guard keeps empty groups
/// finite.
pub fn fairness_loss(
    g: &mut Graph,
    fake: NodeId,
    bindings: &FairnessBindings,
    weights: &LossWeights,
) -> Result<NodeId> {
    let width = g.value(fake).cols();
    if bindings.privileged_col >= width || bindings.favorable_col >= width {
        return Err(Error::Shape(format!(
            "fairness bindings ({}, {}) out of width {width}",
            bindings.privileged_col, bindings.favorable_col
        )));
    }
    let p_s1 = g.slice_cols(fake, bindings.privileged_col, 1)?;
    let p_y1 = g.slice_cols(fake, bindings.favorable_col, 1)?;

    let rate = |g: &mut Graph, p_group: NodeId| -> Result<NodeId> {
        let joint = g.mul(p_group, p_y1)?;
        let joint_rows = g.sum_rows(joint)?;
        let num = g.sum_cols(joint_rows)?;
        let group_rows = g.sum_rows(p_group)?;
        let den_raw = g.sum_cols(group_rows)?;
        let den = g.add_scalar(den_raw, weights.epsilon)?;
        g.div(num, den)
    };

    let rate_1 = rate(g, p_s1)?;
    let neg_s1 = g.neg(p_s1)?;
    let p_s0 = g.add_scalar(neg_s1, 1.0)?;
    let rate_0 = rate(g, p_s0)?;

    let signed_gap = g.sub(rate_0, rate_1)?;
    let gap = ops::abs_val(g, signed_gap)?;
    let clamped = ops::clamp(g, gap, weights.fairness_clamp.0, weights.fairness_clamp.1)?;
    g.scale(clamped, weights.lambda_fairness)
}

/// Final generator objective: the adversarial term plus, inside the phase
/// window, the privacy and fairness penalties.
pub fn combined_generator_loss(
    g: &mut Graph,
    adv: NodeId,
    privacy: Option<NodeId>,
    fairness: Option<NodeId>,
    phase_active: bool,
) -> Result<NodeId> {
    if !phase_active {
        return Ok(adv);
    }
    let mut total = adv;
    if let Some(p) = privacy {
        total = g.add(total, p)?;
    }
    if let Some(f) = fairness {
        total = g.add(total, f)?;
    }
    Ok(total)
}
