//! Adversarial training loop: n_critic critic updates per generator
//! update, with the privacy and fairness penalties joining the generator
//! objective inside the (pf_start, pf_end) epoch window.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diff::graph::Graph;
use crate::diff::ops::{standard_normal, standard_uniform, BnMode};
use crate::diff::params::adam_step;
use crate::diff::tensor::Tensor;
use crate::error::{Error, Result};
use crate::losses::{
    self, FairnessBindings, LossWeights, PrivacyBatch, PrivacyReference,
};
use crate::networks::{CriticArch, CriticNet, GeneratorArch, GeneratorNet};
use crate::transform::{DataMatrix, TransformModel};

/// How the per-feature weights of the privacy distances are built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureWeighting {
    Uniform,
    InverseStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub n_critic: usize,
    pub lr_generator: f64,
    pub lr_critic: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weights: LossWeights,
    /// Epoch bounds of the privacy/fairness window; the terms are active
    /// for epochs i with pf_start < i < pf_end. Defaults: E/4 and E.
    pub pf_start: Option<usize>,
    pub pf_end: Option<usize>,
    pub seed: u64,
    pub noise_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub temperature: f64,
    /// Save a checkpoint every this many epochs (0 disables periodic saves).
    pub checkpoint_every: usize,
    /// Store checkpoint tensors at full 64-bit precision so resumed runs
    /// are bit-identical to uninterrupted ones.
    pub deterministic: bool,
    pub feature_weighting: FeatureWeighting,
    /// Test hook: poison a generator parameter right before this global
    /// generator step so the non-finite guard can be exercised.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inject_nan_at_step: Option<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 256,
            n_critic: 4,
            lr_generator: 1e-4,
            lr_critic: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            weights: LossWeights::default(),
            pf_start: None,
            pf_end: None,
            seed: 0,
            noise_dim: crate::networks::DEFAULT_NOISE_DIM,
            generator_hidden: crate::networks::DEFAULT_HIDDEN.to_vec(),
            critic_hidden: crate::networks::DEFAULT_HIDDEN.to_vec(),
            temperature: crate::networks::DEFAULT_TEMPERATURE,
            checkpoint_every: 0,
            deterministic: false,
            feature_weighting: FeatureWeighting::Uniform,
            inject_nan_at_step: None,
        }
    }
}

impl TrainConfig {
    pub fn pf_window(&self) -> (usize, usize) {
        (
            self.pf_start.unwrap_or(self.epochs / 4),
            self.pf_end.unwrap_or(self.epochs),
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch_size must be at least 2".into()));
        }
        if self.n_critic < 1 {
            return Err(Error::Config("n_critic must be at least 1".into()));
        }
        let (start, end) = self.pf_window();
        if start > end || end > self.epochs {
            return Err(Error::Config(format!(
                "pf window ({start}, {end}) must satisfy 0 <= start <= end <= epochs"
            )));
        }
        if !(self.lr_generator > 0.0 && self.lr_critic > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.noise_dim == 0 {
            return Err(Error::Config("noise_dim must be positive".into()));
        }
        if self.temperature <= 0.0 {
            return Err(Error::Config("temperature must be positive".into()));
        }
        Ok(())
    }
}

/// One epoch of the training log (written as a JSON line per epoch).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainLogRecord {
    pub epoch: usize,
    pub critic_loss: f64,
    pub adv_loss: f64,
    pub privacy_loss: f64,
    pub fairness_loss: f64,
    pub gradient_penalty: f64,
    pub phase_active: bool,
    pub wall_time_secs: f64,
}

impl TrainLogRecord {
    pub fn all_finite(&self) -> bool {
        self.critic_loss.is_finite()
            && self.adv_loss.is_finite()
            && self.privacy_loss.is_finite()
            && self.fairness_loss.is_finite()
            && self.gradient_penalty.is_finite()
            && self.wall_time_secs.is_finite()
    }
}

/// Per-feature weights for privacy distances over the encoded training
/// matrix. Inverse-std weights are floored so they stay strictly positive.
pub fn feature_weights(train: &Tensor, mode: FeatureWeighting) -> Vec<f64> {
    match mode {
        FeatureWeighting::Uniform => vec![1.0; train.cols()],
        FeatureWeighting::InverseStd => {
            let n = train.rows() as f64;
            (0..train.cols())
                .map(|c| {
                    let mean: f64 = (0..train.rows()).map(|r| train.get(r, c)).sum::<f64>() / n;
                    let var: f64 = (0..train.rows())
                        .map(|r| {
                            let d = train.get(r, c) - mean;
                            d * d
                        })
                        .sum::<f64>()
                        / n;
                    1.0 / var.sqrt().max(1e-6)
                })
                .collect()
        }
    }
}

/// Exact nearest-neighbor-excluding-self distance for every training row
/// under the weighted norm. Duplicate rows get d_i = 0 and are counted.
pub fn precompute_privacy_reference(train: &Tensor, weights: &[f64]) -> Result<PrivacyReference> {
    let n = train.rows();
    if n < 2 {
        return Err(Error::DegenerateTraining(
            "privacy reference needs at least 2 rows".into(),
        ));
    }
    if weights.len() != train.cols() {
        return Err(Error::Shape(format!(
            "{} weights for {} columns",
            weights.len(),
            train.cols()
        )));
    }
    let nearest = |i: usize| -> f64 {
        let row = train.row(i);
        let mut best = f64::INFINITY;
        for j in 0..n {
            if j == i {
                continue;
            }
            let other = train.row(j);
            let mut acc = 0.0;
            // Partial-distance pruning keeps the result exact.
            for c in 0..row.len() {
                let d = weights[c] * (row[c] - other[c]);
                acc += d * d;
                if acc >= best {
                    break;
                }
            }
            if acc < best {
                best = acc;
            }
        }
        best.sqrt()
    };
    let distances: Vec<f64> = if n >= 512 {
        (0..n).into_par_iter().map(nearest).collect()
    } else {
        (0..n).map(nearest).collect()
    };
    let duplicate_rows = distances.iter().filter(|&&d| d == 0.0).count();
    Ok(PrivacyReference {
        distances,
        weights: weights.to_vec(),
        duplicate_rows,
    })
}

/// Encoded coordinates of the privileged and favorable categories, used
/// by the fairness term and the evaluation metrics.
pub fn fairness_bindings(model: &TransformModel) -> Result<FairnessBindings> {
    let schema = &model.schema;
    let privileged_col = model
        .category_coordinate(&schema.sensitive.0, &schema.sensitive.1)
        .ok_or_else(|| {
            Error::Config(format!(
                "privileged value {:?} not in the fitted vocabulary of {:?}",
                schema.sensitive.1, schema.sensitive.0
            ))
        })?;
    let favorable_col = model
        .category_coordinate(&schema.target.0, &schema.target.1)
        .ok_or_else(|| {
            Error::Config(format!(
                "favorable value {:?} not in the fitted vocabulary of {:?}",
                schema.target.1, schema.target.0
            ))
        })?;
    Ok(FairnessBindings {
        privileged_col,
        favorable_col,
    })
}

/// Serializable RNG stream position so resumed runs continue the exact
/// random sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: Vec<u8>,
    pub word_pos_hi: u64,
    pub word_pos_lo: u64,
}

impl RngState {
    pub fn capture(rng: &ChaCha12Rng) -> Self {
        let pos = rng.get_word_pos();
        RngState {
            seed: rng.get_seed().to_vec(),
            word_pos_hi: (pos >> 64) as u64,
            word_pos_lo: pos as u64,
        }
    }

    pub fn restore(&self) -> Result<ChaCha12Rng> {
        let seed: [u8; 32] = self
            .seed
            .as_slice()
            .try_into()
            .map_err(|_| Error::Checkpoint("rng seed must be 32 bytes".into()))?;
        let mut rng = ChaCha12Rng::from_seed(seed);
        rng.set_word_pos(((self.word_pos_hi as u128) << 64) | self.word_pos_lo as u128);
        Ok(rng)
    }
}

/// Full training state: model parameters, optimizer state, RNG stream,
/// and the epoch counter.
pub struct Trainer {
    pub config: TrainConfig,
    pub transform: TransformModel,
    pub generator: GeneratorNet,
    pub critic: CriticNet,
    pub fairness: FairnessBindings,
    rng: ChaCha12Rng,
    epoch: usize,
    global_step: u64,
    train_rows: usize,
}

impl Trainer {
    pub fn new(config: TrainConfig, transform: TransformModel) -> Result<Self> {
        config.validate()?;
        let gen_arch = GeneratorArch::from_transform_with(
            &transform,
            config.noise_dim,
            config.generator_hidden.clone(),
            config.temperature,
        );
        let critic_arch = CriticArch {
            input_width: transform.encoded_width,
            hidden_dims: config.critic_hidden.clone(),
        };
        let generator = GeneratorNet::init(gen_arch, config.seed);
        let critic = CriticNet::init(critic_arch, config.seed.wrapping_add(1));
        let fairness = fairness_bindings(&transform)?;
        let rng = ChaCha12Rng::seed_from_u64(config.seed.wrapping_add(2));
        Ok(Trainer {
            config,
            transform,
            generator,
            critic,
            fairness,
            rng,
            epoch: 0,
            global_step: 0,
            train_rows: 0,
        })
    }

    pub fn from_checkpoint(cp: crate::checkpoint::Checkpoint) -> Result<Self> {
        cp.config.validate()?;
        let fairness = fairness_bindings(&cp.transform)?;
        let rng = cp.rng.restore()?;
        Ok(Trainer {
            config: cp.config,
            transform: cp.transform,
            generator: GeneratorNet {
                arch: cp.generator_arch,
                store: cp.generator,
            },
            critic: CriticNet {
                arch: cp.critic_arch,
                store: cp.critic,
            },
            fairness,
            rng,
            epoch: cp.epoch,
            global_step: cp.global_step,
            train_rows: cp.train_rows,
        })
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn to_checkpoint(&self) -> crate::checkpoint::Checkpoint {
        crate::checkpoint::Checkpoint {
            transform: self.transform.clone(),
            generator_arch: self.generator.arch.clone(),
            critic_arch: self.critic.arch.clone(),
            generator: self.generator.store.clone(),
            critic: self.critic.store.clone(),
            config: self.config.clone(),
            epoch: self.epoch,
            global_step: self.global_step,
            train_rows: self.train_rows,
            rng: RngState::capture(&self.rng),
        }
    }

    fn batch_tensor(&self, matrix: &Tensor, indices: &[usize]) -> Tensor {
        let width = matrix.cols();
        let mut data = Vec::with_capacity(indices.len() * width);
        for &i in indices {
            data.extend_from_slice(matrix.row(i));
        }
        Tensor::from_vec(indices.len(), width, data)
    }

    /// One epoch: a shuffled sweep over the training rows in blocks of
    /// n_critic + 1 minibatches (n_critic critic updates, one generator
    /// update). Partial trailing batches are dropped.
    pub fn run_epoch(
        &mut self,
        matrix: &Tensor,
        privacy: &PrivacyReference,
    ) -> Result<TrainLogRecord> {
        let start = Instant::now();
        let epoch_index = self.epoch + 1;
        let m = self.config.batch_size;
        let n = matrix.rows();
        self.train_rows = n;
        if n < m * (self.config.n_critic + 1) {
            return Err(Error::DegenerateTraining(format!(
                "need at least batch_size x (n_critic + 1) = {} rows, got {n}",
                m * (self.config.n_critic + 1)
            )));
        }
        if privacy.distances.len() != n {
            return Err(Error::Shape(format!(
                "privacy reference covers {} rows but the matrix has {n}",
                privacy.distances.len()
            )));
        }

        let (pf_start, pf_end) = self.config.pf_window();
        let phase_active = pf_start < epoch_index && epoch_index < pf_end;
        let lw = self.config.weights;
        let use_privacy = phase_active && lw.lambda_privacy > 0.0;
        let use_fairness = phase_active && lw.lambda_fairness > 0.0;

        let mut indices: Vec<usize> = (0..n).collect();
        use rand::seq::SliceRandom;
        indices.shuffle(&mut self.rng);

        let batches_per_step = self.config.n_critic + 1;
        let n_steps = (n / m) / batches_per_step;
        if n_steps == 0 {
            return Err(Error::DegenerateTraining(
                "not enough full batches for one generator step".into(),
            ));
        }

        let mut sums = TrainLogRecord {
            epoch: epoch_index,
            critic_loss: 0.0,
            adv_loss: 0.0,
            privacy_loss: 0.0,
            fairness_loss: 0.0,
            gradient_penalty: 0.0,
            phase_active,
            wall_time_secs: 0.0,
        };

        let mut cursor = 0usize;
        for _ in 0..n_steps {
            // Critic updates.
            for _ in 0..self.config.n_critic {
                let batch_idx = &indices[cursor..cursor + m];
                cursor += m;
                let real_t = self.batch_tensor(matrix, batch_idx);
                let z = standard_normal(m, self.config.noise_dim, &mut self.rng);
                let e = standard_uniform(m, 1, &mut self.rng);

                let mut g = Graph::new();
                let gen_binding = self.generator.bind(&mut g)?;
                let fake_attached = self.generator.forward(
                    &mut g,
                    &gen_binding,
                    &z,
                    BnMode::Train,
                    Some(&mut self.rng),
                )?;
                // The critic objective must not differentiate into the
                // generator, so the fake batch re-enters as a leaf.
                let fake = g.leaf(g.value(fake_attached).clone())?;
                let real = g.leaf(real_t)?;
                let c_binding = self.critic.bind(&mut g)?;
                let terms = losses::critic_loss(
                    &mut g,
                    &self.critic,
                    &c_binding,
                    real,
                    fake,
                    &e,
                    lw.lambda_gp,
                )?;
                let grads = g.grad(terms.loss, &c_binding.ids)?;
                adam_step(
                    &mut self.critic.store,
                    &grads,
                    self.config.lr_critic,
                    self.config.beta1,
                    self.config.beta2,
                )?;
                sums.critic_loss += g.scalar(terms.loss) / self.config.n_critic as f64;
                sums.gradient_penalty += terms.gradient_penalty / self.config.n_critic as f64;
            }

            // Generator update.
            if let Some(at) = self.config.inject_nan_at_step {
                if self.global_step == at {
                    let poisoned = &mut self.generator.store.params[0].value;
                    let mid = poisoned.len() / 2;
                    poisoned.data_mut()[mid] = f64::NAN;
                }
            }
            let batch_idx = &indices[cursor..cursor + m];
            cursor += m;
            let real_t = self.batch_tensor(matrix, batch_idx);
            let z = standard_normal(m, self.config.noise_dim, &mut self.rng);

            let mut g = Graph::new();
            let gen_binding = self.generator.bind(&mut g)?;
            let fake = self.generator.forward(
                &mut g,
                &gen_binding,
                &z,
                BnMode::Train,
                Some(&mut self.rng),
            )?;
            let c_binding = self.critic.bind(&mut g)?;
            let adv = losses::generator_adv_loss(&mut g, &self.critic, &c_binding, fake)?;

            let privacy_node = if use_privacy {
                let d_batch: Vec<f64> =
                    batch_idx.iter().map(|&i| privacy.distances[i]).collect();
                let batch = PrivacyBatch {
                    real: &real_t,
                    distances: &d_batch,
                };
                Some(losses::privacy_loss_weighted(
                    &mut g,
                    fake,
                    &batch,
                    &privacy.weights,
                    &lw,
                )?)
            } else {
                None
            };
            let fairness_node = if use_fairness {
                Some(losses::fairness_loss(&mut g, fake, &self.fairness, &lw)?)
            } else {
                None
            };
            let total = losses::combined_generator_loss(
                &mut g,
                adv,
                privacy_node,
                fairness_node,
                phase_active,
            )?;
            let grads = g.grad(total, &gen_binding.ids)?;
            adam_step(
                &mut self.generator.store,
                &grads,
                self.config.lr_generator,
                self.config.beta1,
                self.config.beta2,
            )?;
            self.global_step += 1;

            sums.adv_loss += g.scalar(adv);
            sums.privacy_loss += privacy_node.map_or(0.0, |p| g.scalar(p));
            sums.fairness_loss += fairness_node.map_or(0.0, |f| g.scalar(f));
        }

        self.epoch = epoch_index;
        let steps = n_steps as f64;
        let record = TrainLogRecord {
            epoch: epoch_index,
            critic_loss: sums.critic_loss / steps,
            adv_loss: sums.adv_loss / steps,
            privacy_loss: sums.privacy_loss / steps,
            fairness_loss: sums.fairness_loss / steps,
            gradient_penalty: sums.gradient_penalty / steps,
            phase_active,
            wall_time_secs: start.elapsed().as_secs_f64(),
        };
        if !record.all_finite() {
            return Err(Error::NonFinite {
                context: format!("training log record for epoch {epoch_index}"),
            });
        }
        Ok(record)
    }
}

/// Train from scratch up to `upto` epochs (capped by config.epochs),
/// invoking `on_epoch` with each log record.
pub fn train_epochs(
    config: TrainConfig,
    transform: TransformModel,
    matrix: &DataMatrix,
    privacy: &PrivacyReference,
    upto: usize,
    mut on_epoch: impl FnMut(&TrainLogRecord),
) -> Result<(crate::checkpoint::Checkpoint, Vec<TrainLogRecord>)> {
    let mut trainer = Trainer::new(config, transform)?;
    let tensor = matrix.to_tensor();
    let target = upto.min(trainer.config.epochs);
    let mut log = Vec::with_capacity(target);
    while trainer.epoch() < target {
        let record = trainer.run_epoch(&tensor, privacy)?;
        on_epoch(&record);
        log.push(record);
    }
    Ok((trainer.to_checkpoint(), log))
}

/// Continue a checkpointed run to config.epochs.
pub fn resume(
    cp: crate::checkpoint::Checkpoint,
    matrix: &DataMatrix,
    privacy: &PrivacyReference,
    mut on_epoch: impl FnMut(&TrainLogRecord),
) -> Result<(crate::checkpoint::Checkpoint, Vec<TrainLogRecord>)> {
    let mut trainer = Trainer::from_checkpoint(cp)?;
    let tensor = matrix.to_tensor();
    let mut log = Vec::new();
    while trainer.epoch() < trainer.config.epochs {
        let record = trainer.run_epoch(&tensor, privacy)?;
        on_epoch(&record);
        log.push(record);
    }
    Ok((trainer.to_checkpoint(), log))
}
