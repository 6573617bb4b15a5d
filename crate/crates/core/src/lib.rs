//! Synthetic tabular data generation with privacy and fairness penalties
//! in the generator objective, plus the matching evaluation suite
//! (train-on-synthetic/test-on-real utility, demographic-parity gap,
//! nearest-neighbor identifiability).

pub mod checkpoint;
pub mod diff;
pub mod losses;
pub mod trainer;
pub mod networks;
pub mod error;
pub mod eval;
pub mod schema;
pub mod synth;
pub mod transform;

pub use error::{Error, Result};
