//! Generator and critic architectures: a shared trunk with a numeric head
//! and one gumbel-softmax head per categorical column on the generator
//! side, and a plain leaky-relu scorer on the critic side.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::diff::graph::{Graph, NodeId};
use crate::diff::ops::{self, BnMode, RunningStats, BN_EPS, BN_MOMENTUM};
use crate::diff::params::ParamStore;
use crate::diff::tensor::Tensor;
use crate::error::{Error, Result};
use crate::transform::TransformModel;

pub const LEAKY_SLOPE: f64 = 0.01;
pub const DEFAULT_NOISE_DIM: usize = 128;
pub const DEFAULT_HIDDEN: [usize; 2] = [256, 256];
pub const DEFAULT_TEMPERATURE: f64 = 0.2;

/// One output column of the generator, in encoded-layout order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeadSlot {
    /// Column `head_col` of the shared numeric head.
    Numeric { head_col: usize },
    /// Dedicated categorical head `head` with `cardinality` logits.
    Categorical { head: usize, cardinality: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorArch {
    pub noise_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub temperature: f64,
    /// One slot per table column, in the encoded block layout order.
    pub plan: Vec<HeadSlot>,
}

impl GeneratorArch {
    pub fn from_transform(model: &TransformModel) -> Self {
        Self::from_transform_with(
            model,
            DEFAULT_NOISE_DIM,
            DEFAULT_HIDDEN.to_vec(),
            DEFAULT_TEMPERATURE,
        )
    }

    pub fn from_transform_with(
        model: &TransformModel,
        noise_dim: usize,
        hidden_dims: Vec<usize>,
        temperature: f64,
    ) -> Self {
        let mut plan = Vec::with_capacity(model.schema.n_columns());
        let mut head_col = 0usize;
        let mut head = 0usize;
        for (ci, span) in model.layout.iter().enumerate() {
            match model.schema.columns[ci].1 {
                crate::schema::ColumnKind::Numeric => {
                    plan.push(HeadSlot::Numeric { head_col });
                    head_col += 1;
                }
                crate::schema::ColumnKind::Categorical => {
                    plan.push(HeadSlot::Categorical {
                        head,
                        cardinality: span.len,
                    });
                    head += 1;
                }
            }
        }
        GeneratorArch {
            noise_dim,
            hidden_dims,
            temperature,
            plan,
        }
    }

    pub fn numeric_width(&self) -> usize {
        self.plan
            .iter()
            .filter(|s| matches!(s, HeadSlot::Numeric { .. }))
            .count()
    }

    pub fn categorical_cards(&self) -> Vec<usize> {
        self.plan
            .iter()
            .filter_map(|s| match s {
                HeadSlot::Categorical { cardinality, .. } => Some(*cardinality),
                HeadSlot::Numeric { .. } => None,
            })
            .collect()
    }

    pub fn output_width(&self) -> usize {
        self.plan
            .iter()
            .map(|s| match s {
                HeadSlot::Numeric { .. } => 1,
                HeadSlot::Categorical { cardinality, .. } => *cardinality,
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticArch {
    pub input_width: usize,
    pub hidden_dims: Vec<usize>,
}

impl CriticArch {
    pub fn new(input_width: usize) -> Self {
        CriticArch {
            input_width,
            hidden_dims: DEFAULT_HIDDEN.to_vec(),
        }
    }
}

/// Kaiming-uniform weights: U(-b, b) with b = sqrt(6 / fan_in), giving an
/// empirical std of sqrt(2 / fan_in).
fn kaiming_uniform<R: Rng>(fan_in: usize, fan_out: usize, rng: &mut R) -> Tensor {
    let bound = (6.0 / fan_in as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.gen::<f64>() * 2.0 * bound - bound)
        .collect();
    Tensor::from_vec(fan_in, fan_out, data)
}

fn add_linear<R: Rng>(
    store: &mut ParamStore,
    prefix: &str,
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) {
    store.add_param(format!("{prefix}.weight"), kaiming_uniform(fan_in, fan_out, rng));
    store.add_param(format!("{prefix}.bias"), Tensor::zeros(1, fan_out));
}

fn add_batch_norm(store: &mut ParamStore, prefix: &str, width: usize) {
    store.add_param(format!("{prefix}.gamma"), Tensor::filled(1, width, 1.0));
    store.add_param(format!("{prefix}.beta"), Tensor::zeros(1, width));
    store.add_buffer(format!("{prefix}.running_mean"), Tensor::zeros(1, width));
    store.add_buffer(format!("{prefix}.running_var"), Tensor::filled(1, width, 1.0));
}

pub fn init_generator_params(arch: &GeneratorArch, seed: u64) -> ParamStore {
    use rand::SeedableRng;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let mut width = arch.noise_dim;
    for (i, &h) in arch.hidden_dims.iter().enumerate() {
        add_linear(&mut store, &format!("trunk{i}"), width, h, &mut rng);
        add_batch_norm(&mut store, &format!("trunk{i}"), h);
        width = h;
    }
    if arch.numeric_width() > 0 {
        add_linear(&mut store, "num", width, arch.numeric_width(), &mut rng);
        add_batch_norm(&mut store, "num", arch.numeric_width());
    }
    for (k, &card) in arch.categorical_cards().iter().enumerate() {
        add_linear(&mut store, &format!("cat{k}"), width, card, &mut rng);
    }
    store
}

pub fn init_critic_params(arch: &CriticArch, seed: u64) -> ParamStore {
    use rand::SeedableRng;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let mut width = arch.input_width;
    for (i, &h) in arch.hidden_dims.iter().enumerate() {
        add_linear(&mut store, &format!("layer{i}"), width, h, &mut rng);
        width = h;
    }
    add_linear(&mut store, "out", width, 1, &mut rng);
    store
}

/// Generator forward mode. Train uses batch statistics and soft
/// gumbel-softmax heads; Eval uses running statistics with argmax one-hot
/// heads (deterministic given params and z); Sample uses running
/// statistics and draws each categorical cell from softmax(logits) via
/// the gumbel-max trick, which is what generation uses so emitted
/// category frequencies follow the learned distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenMode {
    Train,
    Eval,
    Sample,
}

impl GenMode {
    fn bn_mode(self) -> BnMode {
        match self {
            GenMode::Train => BnMode::Train,
            GenMode::Eval | GenMode::Sample => BnMode::Eval,
        }
    }
}

/// Parameter leaves pushed into a graph, aligned with the store order.
/// Real/fake/interpolate passes must share one binding so gradients
/// accumulate on the same leaves.
#[derive(Debug, Clone)]
pub struct Binding {
    names: Vec<String>,
    pub ids: Vec<NodeId>,
}

impl Binding {
    pub fn id(&self, name: &str) -> NodeId {
        let pos = self
            .names
            .iter()
            .position(|n| n == name)
            .unwrap_or_else(|| panic!("unbound parameter {name:?}"));
        self.ids[pos]
    }
}

pub fn bind_params(g: &mut Graph, store: &ParamStore) -> Result<Binding> {
    let mut names = Vec::with_capacity(store.params.len());
    let mut ids = Vec::with_capacity(store.params.len());
    for entry in &store.params {
        names.push(entry.name.clone());
        ids.push(g.leaf(entry.value.clone())?);
    }
    Ok(Binding { names, ids })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorNet {
    pub arch: GeneratorArch,
    pub store: ParamStore,
}

impl GeneratorNet {
    pub fn init(arch: GeneratorArch, seed: u64) -> Self {
        let store = init_generator_params(&arch, seed);
        GeneratorNet { arch, store }
    }

    pub fn bind(&self, g: &mut Graph) -> Result<Binding> {
        bind_params(g, &self.store)
    }

    fn batch_norm_layer(
        &mut self,
        g: &mut Graph,
        binding: &Binding,
        prefix: &str,
        x: NodeId,
        mode: BnMode,
    ) -> Result<NodeId> {
        let gamma = binding.id(&format!("{prefix}.gamma"));
        let beta = binding.id(&format!("{prefix}.beta"));
        let mut stats = RunningStats {
            mean: self.store.buffer(&format!("{prefix}.running_mean")).clone(),
            var: self.store.buffer(&format!("{prefix}.running_var")).clone(),
        };
        let y = ops::batch_norm(g, x, gamma, beta, mode, &mut stats, BN_MOMENTUM, BN_EPS)?;
        if mode == BnMode::Train {
            *self.store.buffer_mut(&format!("{prefix}.running_mean")) = stats.mean;
            *self.store.buffer_mut(&format!("{prefix}.running_var")) = stats.var;
        }
        Ok(y)
    }

    /// Forward pass. Train mode samples fresh gumbel noise from `rng` for
    /// every categorical head; eval mode emits hard one-hot blocks from
    /// the head logits (ties to the lowest index) and is deterministic
    /// given (params, z).
    pub fn forward(
        &mut self,
        g: &mut Graph,
        binding: &Binding,
        z: &Tensor,
        mode: BnMode,
        mut rng: Option<&mut ChaCha12Rng>,
    ) -> Result<NodeId> {
        if z.cols() != self.arch.noise_dim {
            return Err(Error::Shape(format!(
                "noise width {} != noise_dim {}",
                z.cols(),
                self.arch.noise_dim
            )));
        }
        let n = z.rows();
        let mut h = g.leaf(z.clone())?;
        for i in 0..self.arch.hidden_dims.len() {
            let w = binding.id(&format!("trunk{i}.weight"));
            let b = binding.id(&format!("trunk{i}.bias"));
            let lin = ops::linear(g, h, w, b)?;
            let bn = self.batch_norm_layer(g, binding, &format!("trunk{i}"), lin, mode)?;
            h = g.relu(bn)?;
        }

        // Numeric head: linear -> batch norm -> relu, with a hard upper
        // clamp at 1 so outputs live in the encoded [0,1] range.
        let numeric = if self.arch.numeric_width() > 0 {
            let w = binding.id("num.weight");
            let b = binding.id("num.bias");
            let lin = ops::linear(g, h, w, b)?;
            let bn = self.batch_norm_layer(g, binding, "num", lin, mode)?;
            let pos = g.relu(bn)?;
            let above_one = g.add_scalar(pos, -1.0)?;
            let spill = g.relu(above_one)?;
            Some(g.sub(pos, spill)?)
        } else {
            None
        };

        let mut cat_heads = Vec::new();
        for (k, &card) in self.arch.categorical_cards().iter().enumerate() {
            let w = binding.id(&format!("cat{k}.weight"));
            let b = binding.id(&format!("cat{k}.bias"));
            let logits = ops::linear(g, h, w, b)?;
            let head = match mode {
                BnMode::Train => {
                    let rng = rng.as_deref_mut().ok_or_else(|| {
                        Error::Contract("train-mode forward needs a noise source".into())
                    })?;
                    let noise = ops::gumbel_noise(n, card, rng);
                    ops::gumbel_softmax(
                        g,
                        logits,
                        std::sync::Arc::new(vec![(0, card)]),
                        self.arch.temperature,
                        &noise,
                    )?
                }
                BnMode::Eval => {
                    let v = g.value(logits);
                    let mut hard = Tensor::zeros(n, card);
                    for r in 0..n {
                        let row = v.row(r);
                        let mut best = 0usize;
                        for (c, &val) in row.iter().enumerate() {
                            if val > row[best] {
                                best = c;
                            }
                        }
                        hard.set(r, best, 1.0);
                    }
                    g.leaf(hard)?
                }
            };
            cat_heads.push(head);
        }

        // Assemble heads into the encoded layout by embedding each part
        // at its column span and summing.
        let width = self.arch.output_width();
        let mut out: Option<NodeId> = None;
        let mut cursor = 0usize;
        for slot in &self.arch.plan {
            let (part, len) = match slot {
                HeadSlot::Numeric { head_col } => {
                    let num = numeric.expect("plan has numeric slots");
                    (g.slice_cols(num, *head_col, 1)?, 1)
                }
                HeadSlot::Categorical { head, cardinality } => (cat_heads[*head], *cardinality),
            };
            let embedded = g.embed_cols(part, cursor, width)?;
            out = Some(match out {
                Some(acc) => g.add(acc, embedded)?,
                None => embedded,
            });
            cursor += len;
        }
        out.ok_or_else(|| Error::Contract("generator has no output heads".into()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticNet {
    pub arch: CriticArch,
    pub store: ParamStore,
}

impl CriticNet {
    pub fn init(arch: CriticArch, seed: u64) -> Self {
        let store = init_critic_params(&arch, seed);
        CriticNet { arch, store }
    }

    pub fn bind(&self, g: &mut Graph) -> Result<Binding> {
        bind_params(g, &self.store)
    }

    /// Per-row scalar scores (n, 1); final layer has no activation.
    pub fn forward(&self, g: &mut Graph, binding: &Binding, input: NodeId) -> Result<NodeId> {
        if g.value(input).cols() != self.arch.input_width {
            return Err(Error::Shape(format!(
                "critic input width {} != {}",
                g.value(input).cols(),
                self.arch.input_width
            )));
        }
        let mut h = input;
        for i in 0..self.arch.hidden_dims.len() {
            let w = binding.id(&format!("layer{i}.weight"));
            let b = binding.id(&format!("layer{i}.bias"));
            let lin = ops::linear(g, h, w, b)?;
            h = g.leaky_relu(lin, LEAKY_SLOPE)?;
        }
        let w = binding.id("out.weight");
        let b = binding.id("out.bias");
        ops::linear(g, h, w, b)
    }

    /// Gradient penalty at the interpolates plus its exact parameter
    /// gradients, as one self-contained evaluation.
    pub fn gradient_penalty_param_grads(
        &self,
        interpolates: &Tensor,
    ) -> Result<(f64, Vec<Tensor>)> {
        let mut g = Graph::new();
        let binding = self.bind(&mut g)?;
        let x = g.leaf(interpolates.clone())?;
        let penalty = ops::gradient_penalty(&mut g, x, |g, x| self.forward(g, &binding, x))?;
        let grads = g.grad(penalty, &binding.ids)?;
        Ok((g.scalar(penalty), grads))
    }
}
