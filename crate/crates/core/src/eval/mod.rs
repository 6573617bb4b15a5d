//! Evaluation of real/synthetic table pairs on the three axes: utility
//! (train-on-synthetic, test-on-real classification), fairness
//! (demographic-parity gap on hard counts), and privacy (nearest-neighbor
//! identifiability), with repetition statistics.

pub mod report;
pub mod tree;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::diff::tensor::Tensor;
use crate::error::{Error, Result};
use crate::schema::{group_counts, ColumnKind, RawTable};
use crate::trainer::{feature_weights, precompute_privacy_reference, FeatureWeighting};
use crate::transform::{self, TransformModel};
use tree::TreeSettings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub repetitions: usize,
    pub seed: u64,
    pub feature_weighting: FeatureWeighting,
    pub tree: TreeSettings,
    /// Evaluate the identifiability indicator on at most this many real
    /// rows (seeded subsample); distances still run against the full sets.
    pub identifiability_cap: Option<usize>,
    pub dataset: String,
    pub model_id: String,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            repetitions: 10,
            seed: 0,
            feature_weighting: FeatureWeighting::Uniform,
            tree: TreeSettings::default(),
            identifiability_cap: None,
            dataset: String::new(),
            model_id: String::new(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions < 1 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        Ok(())
    }
}

/// Mean and population standard deviation over repetition values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricStat {
    pub mean: f64,
    pub std: f64,
    pub values: Vec<f64>,
}

impl MetricStat {
    pub fn from_values(values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        MetricStat {
            mean,
            std: var.sqrt(),
            values,
        }
    }

    pub fn replicated(value: f64, repetitions: usize) -> Self {
        Self::from_values(vec![value; repetitions])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityBlock {
    pub accuracy: MetricStat,
    pub f1: MetricStat,
    pub auc_roc: MetricStat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetadata {
    pub dataset: String,
    pub model_id: String,
    pub seed: u64,
    pub repetitions: usize,
    pub n_real_train: usize,
    pub n_real_test: usize,
    pub n_synth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metadata: EvalMetadata,
    /// Train-on-synthetic, test-on-real classifier efficacy; absent when
    /// the synthetic target was degenerate (see warnings).
    pub utility: Option<UtilityBlock>,
    /// Same classifier protocol trained on the real training split.
    pub real_baseline: Option<UtilityBlock>,
    pub dp_gap: MetricStat,
    pub identifiability: MetricStat,
    pub warnings: Vec<String>,
}

/// Demographic-parity gap on hard counts: |P(y=1|s=1) - P(y=1|s=0)|.
/// An empty group contributes rate 0 and a degenerate-group flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpGap {
    pub gap: f64,
    pub degenerate_s0: bool,
    pub degenerate_s1: bool,
}

pub fn dp_gap(table: &RawTable) -> DpGap {
    let (s0y1, s0, s1y1, s1) = group_counts(table);
    let rate0 = if s0 > 0 { s0y1 as f64 / s0 as f64 } else { 0.0 };
    let rate1 = if s1 > 0 { s1y1 as f64 / s1 as f64 } else { 0.0 };
    DpGap {
        gap: (rate1 - rate0).abs(),
        degenerate_s0: s0 == 0,
        degenerate_s1: s1 == 0,
    }
}

/// Identifiability: the fraction of real rows whose nearest synthetic
/// neighbor is strictly closer than their nearest other real row, under
/// the weighted norm. Distances are exact; the scan for the synthetic
/// side stops early only once the indicator is already decided.
pub fn identifiability(
    real: &Tensor,
    synth: &Tensor,
    weights: &[f64],
    cap: Option<(usize, u64)>,
) -> Result<f64> {
    if real.rows() == 0 || synth.rows() == 0 {
        return Err(Error::Contract(
            "identifiability needs non-empty real and synthetic sets".into(),
        ));
    }
    if real.cols() != synth.cols() || weights.len() != real.cols() {
        return Err(Error::Shape(format!(
            "layout mismatch: real {:?}, synth {:?}, {} weights",
            real.shape(),
            synth.shape(),
            weights.len()
        )));
    }
    let reference = precompute_privacy_reference(real, weights)?;

    let probe: Vec<usize> = match cap {
        Some((cap, seed)) if cap < real.rows() => {
            let mut idx: Vec<usize> = (0..real.rows()).collect();
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            idx.shuffle(&mut rng);
            idx.truncate(cap);
            idx
        }
        _ => (0..real.rows()).collect(),
    };

    let indicator = |&i: &usize| -> u64 {
        let row = real.row(i);
        let d_i = reference.distances[i];
        let d_sq = d_i * d_i;
        let mut best = f64::INFINITY;
        for j in 0..synth.rows() {
            let other = synth.row(j);
            let mut acc = 0.0;
            for c in 0..row.len() {
                let d = weights[c] * (row[c] - other[c]);
                acc += d * d;
                if acc >= best {
                    break;
                }
            }
            if acc < best {
                best = acc;
                // The indicator is decided as soon as any synthetic row
                // beats d_i; the exact minimum is not needed.
                if best < d_sq {
                    return 1;
                }
            }
        }
        u64::from(best < d_sq)
    };
    let hits: u64 = if probe.len() * synth.rows() >= 1 << 14 {
        probe.par_iter().map(indicator).sum()
    } else {
        probe.iter().map(indicator).sum()
    };
    Ok(hits as f64 / probe.len() as f64)
}

/// AUC-ROC by the rank-sum formulation with midranks for tied scores.
pub fn auc_roc(scores: &[f64], labels: &[bool]) -> f64 {
    debug_assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return 0.5;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0f64;
    let mut k = 0usize;
    while k < order.len() {
        let mut end = k + 1;
        while end < order.len() && scores[order[end]] == scores[order[k]] {
            end += 1;
        }
        // Ranks are 1-based; tied scores share the midrank.
        let midrank = (k + 1 + end) as f64 / 2.0;
        for &idx in &order[k..end] {
            if labels[idx] {
                rank_sum_pos += midrank;
            }
        }
        k = end;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    u / (n_pos as f64 * n_neg as f64)
}

/// Encode a table against a fitted model, dropping the target column and
/// tolerating unseen categories (their one-hot block stays all zero), so
/// held-out real rows never fail feature encoding.
pub fn encode_features(table: &RawTable, model: &TransformModel, skip_col: usize) -> Tensor {
    let width: usize = model
        .layout
        .iter()
        .enumerate()
        .filter(|(ci, _)| *ci != skip_col)
        .map(|(_, span)| span.len)
        .sum();
    let mut data = vec![0.0; table.n_rows() * width];
    for (ri, row) in table.rows.iter().enumerate() {
        let out = &mut data[ri * width..(ri + 1) * width];
        let mut cursor = 0usize;
        for (ci, (name, kind)) in model.schema.columns.iter().enumerate() {
            if ci == skip_col {
                continue;
            }
            let span = model.layout[ci];
            match kind {
                ColumnKind::Numeric => {
                    if let Some(x) = row[ci].as_number() {
                        let q = model
                            .quantile_maps
                            .iter()
                            .find(|q| &q.column == name)
                            .expect("numeric column fitted");
                        out[cursor] = q.forward(x);
                    }
                }
                ColumnKind::Categorical => {
                    if let Some(v) = row[ci].as_text() {
                        let vocab = model
                            .vocabs
                            .iter()
                            .find(|c| &c.column == name)
                            .expect("categorical column fitted");
                        if let Some(idx) = vocab.index_of(v) {
                            out[cursor + idx] = 1.0;
                        }
                    }
                }
            }
            cursor += span.len;
        }
    }
    Tensor::from_vec(table.n_rows(), width, data)
}

/// Train a decision tree on the synthetic table and score it on held-out
/// real rows: (accuracy, binary F1 with the favorable class positive,
/// AUC-ROC from leaf-frequency scores).
pub fn tstr(
    synth: &RawTable,
    real_test: &RawTable,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<(f64, f64, f64)> {
    if synth.schema != real_test.schema {
        return Err(Error::SchemaMismatch(
            "synthetic and real tables must share a schema".into(),
        ));
    }
    let labels_train: Vec<bool> = (0..synth.n_rows()).map(|r| synth.is_favorable(r)).collect();
    let n_pos = labels_train.iter().filter(|&&l| l).count();
    if n_pos == 0 || n_pos == labels_train.len() {
        return Err(Error::DegenerateTraining(
            "synthetic target column has a single class".into(),
        ));
    }

    let model = transform::fit(synth)?;
    let target_idx = synth.schema.target_index();
    let x_train = encode_features(synth, &model, target_idx);
    let x_test = encode_features(real_test, &model, target_idx);
    let labels_test: Vec<bool> = (0..real_test.n_rows())
        .map(|r| real_test.is_favorable(r))
        .collect();

    let tree = tree::fit(&x_train, &labels_train, &cfg.tree, seed)?;
    let scores = tree::predict_proba(&tree, &x_test);

    let mut correct = 0usize;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fne = 0usize;
    for (&score, &label) in scores.iter().zip(&labels_test) {
        let predicted = score > 0.5;
        if predicted == label {
            correct += 1;
        }
        match (predicted, label) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fne += 1,
            (false, false) => {}
        }
    }
    let accuracy = correct as f64 / labels_test.len() as f64;
    let f1_den = 2 * tp + fp + fne;
    let f1 = if f1_den == 0 {
        0.0
    } else {
        2.0 * tp as f64 / f1_den as f64
    };
    let auc = auc_roc(&scores, &labels_test);
    Ok((accuracy, f1, auc))
}

fn utility_over_reps(
    train_table: &RawTable,
    real_test: &RawTable,
    cfg: &EvalConfig,
    warnings: &mut Vec<String>,
    label: &str,
) -> Option<UtilityBlock> {
    let mut acc = Vec::with_capacity(cfg.repetitions);
    let mut f1 = Vec::with_capacity(cfg.repetitions);
    let mut auc = Vec::with_capacity(cfg.repetitions);
    for rep in 0..cfg.repetitions {
        match tstr(train_table, real_test, cfg, cfg.seed.wrapping_add(rep as u64)) {
            Ok((a, f, u)) => {
                acc.push(a);
                f1.push(f);
                auc.push(u);
            }
            Err(e) => {
                warnings.push(format!("{label} classifier skipped: {e}"));
                return None;
            }
        }
    }
    Some(UtilityBlock {
        accuracy: MetricStat::from_values(acc),
        f1: MetricStat::from_values(f1),
        auc_roc: MetricStat::from_values(auc),
    })
}

/// Evaluate a fixed synthetic table: classifier fits repeat with fresh
/// seeds; the demographic-parity gap and identifiability of the fixed
/// table are replicated across repetitions.
pub fn evaluate_all(
    real_train: &RawTable,
    real_test: &RawTable,
    synth: &RawTable,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    if real_train.schema != real_test.schema || real_train.schema != synth.schema {
        return Err(Error::SchemaMismatch(
            "all tables must share one schema".into(),
        ));
    }
    let mut warnings = Vec::new();

    let utility = utility_over_reps(synth, real_test, cfg, &mut warnings, "synthetic");
    let real_baseline = utility_over_reps(real_train, real_test, cfg, &mut warnings, "baseline");

    let gap = dp_gap(synth);
    if gap.degenerate_s0 || gap.degenerate_s1 {
        warnings.push("demographic parity gap has an empty sensitive group".into());
    }

    let ident = identifiability_of_tables(real_train, synth, cfg, &mut warnings)?;
    if ident >= 1.0 {
        warnings.push("identifiability 1.0: maximal privacy risk (synthetic copies real)".into());
    }

    Ok(EvalReport {
        metadata: EvalMetadata {
            dataset: cfg.dataset.clone(),
            model_id: cfg.model_id.clone(),
            seed: cfg.seed,
            repetitions: cfg.repetitions,
            n_real_train: real_train.n_rows(),
            n_real_test: real_test.n_rows(),
            n_synth: synth.n_rows(),
        },
        utility,
        real_baseline,
        dp_gap: MetricStat::replicated(gap.gap, cfg.repetitions),
        identifiability: MetricStat::replicated(ident, cfg.repetitions),
        warnings,
    })
}

fn identifiability_of_tables(
    real_train: &RawTable,
    synth: &RawTable,
    cfg: &EvalConfig,
    _warnings: &mut [String],
) -> Result<f64> {
    let model = transform::fit(real_train)?;
    let real_enc = transform::encode(real_train, &model)?.to_tensor();
    // Lenient encoding for the synthetic side: external baseline files may
    // contain categories the real vocabulary has never seen.
    let synth_enc = encode_all_columns_lenient(synth, &model);
    let w = feature_weights(&real_enc, cfg.feature_weighting);
    identifiability(
        &real_enc,
        &synth_enc,
        &w,
        cfg.identifiability_cap.map(|c| (c, cfg.seed)),
    )
}

fn encode_all_columns_lenient(table: &RawTable, model: &TransformModel) -> Tensor {
    let width = model.encoded_width;
    let mut data = vec![0.0; table.n_rows() * width];
    for (ri, row) in table.rows.iter().enumerate() {
        let out = &mut data[ri * width..(ri + 1) * width];
        for (ci, (name, kind)) in model.schema.columns.iter().enumerate() {
            let span = model.layout[ci];
            match kind {
                ColumnKind::Numeric => {
                    if let Some(x) = row[ci].as_number() {
                        let q = model
                            .quantile_maps
                            .iter()
                            .find(|q| &q.column == name)
                            .expect("numeric column fitted");
                        out[span.start] = q.forward(x);
                    }
                }
                ColumnKind::Categorical => {
                    if let Some(v) = row[ci].as_text() {
                        let vocab = model
                            .vocabs
                            .iter()
                            .find(|c| &c.column == name)
                            .expect("categorical column fitted");
                        if let Some(idx) = vocab.index_of(v) {
                            out[span.start + idx] = 1.0;
                        }
                    }
                }
            }
        }
    }
    Tensor::from_vec(table.n_rows(), width, data)
}

/// Evaluate a trained checkpoint with a fresh synthetic sample per
/// repetition, so the fairness and privacy statistics carry real spread.
pub fn evaluate_checkpoint(
    cp: &Checkpoint,
    real_train: &RawTable,
    real_test: &RawTable,
    cfg: &EvalConfig,
    n_synth: Option<usize>,
) -> Result<EvalReport> {
    cfg.validate()?;
    let n = n_synth.unwrap_or_else(|| {
        if cp.train_rows > 0 {
            cp.train_rows
        } else {
            real_train.n_rows()
        }
    });
    let mut warnings = Vec::new();
    let mut acc = Vec::new();
    let mut f1 = Vec::new();
    let mut auc = Vec::new();
    let mut gaps = Vec::new();
    let mut idents = Vec::new();
    let mut utility_ok = true;

    let model = transform::fit(real_train)?;
    let real_enc = transform::encode(real_train, &model)?.to_tensor();
    let w = feature_weights(&real_enc, cfg.feature_weighting);

    for rep in 0..cfg.repetitions {
        let rep_seed = cfg.seed.wrapping_add(rep as u64);
        let synth = crate::synth::generate(cp, n, rep_seed)?;
        match tstr(&synth, real_test, cfg, rep_seed) {
            Ok((a, f, u)) => {
                acc.push(a);
                f1.push(f);
                auc.push(u);
            }
            Err(e) => {
                warnings.push(format!("repetition {rep}: classifier skipped: {e}"));
                utility_ok = false;
            }
        }
        gaps.push(dp_gap(&synth).gap);
        let synth_enc = encode_all_columns_lenient(&synth, &model);
        idents.push(identifiability(
            &real_enc,
            &synth_enc,
            &w,
            cfg.identifiability_cap.map(|c| (c, rep_seed)),
        )?);
    }

    let utility = if utility_ok && !acc.is_empty() {
        Some(UtilityBlock {
            accuracy: MetricStat::from_values(acc),
            f1: MetricStat::from_values(f1),
            auc_roc: MetricStat::from_values(auc),
        })
    } else {
        None
    };
    let real_baseline = utility_over_reps(real_train, real_test, cfg, &mut warnings, "baseline");

    Ok(EvalReport {
        metadata: EvalMetadata {
            dataset: cfg.dataset.clone(),
            model_id: cfg.model_id.clone(),
            seed: cfg.seed,
            repetitions: cfg.repetitions,
            n_real_train: real_train.n_rows(),
            n_real_test: real_test.n_rows(),
            n_synth: n,
        },
        utility,
        real_baseline,
        dp_gap: MetricStat::from_values(gaps),
        identifiability: MetricStat::from_values(idents),
        warnings,
    })
}
