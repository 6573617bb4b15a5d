//! Sampling trained generators back into raw-data space.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::checkpoint::Checkpoint;
use crate::diff::graph::Graph;
use crate::diff::ops::{standard_normal, BnMode};
use crate::error::{Error, Result};
use crate::networks::GeneratorNet;
use crate::schema::RawTable;
use crate::transform::{decode, DataMatrix};

pub use crate::schema::write_csv;

const GENERATE_BATCH: usize = 512;

/// Draw n rows from the generator in eval mode (hard one-hot categorical
/// blocks) and decode them through the fitted transform. Deterministic
/// per seed.
pub fn generate(cp: &Checkpoint, n: usize, seed: u64) -> Result<RawTable> {
    generate_matrix(cp, n, seed).and_then(|m| decode(&m, &cp.transform))
}

/// Same as [`generate`] but stopping in encoded space.
pub fn generate_matrix(cp: &Checkpoint, n: usize, seed: u64) -> Result<DataMatrix> {
    if n == 0 {
        return Err(Error::Contract("cannot generate zero rows".into()));
    }
    let mut generator = GeneratorNet {
        arch: cp.generator_arch.clone(),
        store: cp.generator.clone(),
    };
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let width = cp.transform.encoded_width;
    let mut values = Vec::with_capacity(n * width);
    let mut remaining = n;
    while remaining > 0 {
        let batch = remaining.min(GENERATE_BATCH);
        let z = standard_normal(batch, generator.arch.noise_dim, &mut rng);
        let mut g = Graph::new();
        let binding = generator.bind(&mut g)?;
        let out = generator.forward(&mut g, &binding, &z, BnMode::Eval, None)?;
        values.extend_from_slice(g.value(out).data());
        remaining -= batch;
    }
    let matrix = DataMatrix {
        n_rows: n,
        width,
        values,
    };
    matrix.validate(&cp.transform, true)?;
    Ok(matrix)
}
