//! Differentiable dense compute: tensors, an eagerly-evaluated compute
//! graph with graph-building reverse mode (so the gradient penalty can be
//! differentiated again), layer composites, and Adam.

pub mod graph;
pub mod ops;
pub mod params;
pub mod tensor;

pub use graph::{Graph, NodeId};
pub use ops::{BnMode, RunningStats};
pub use params::{adam_step, ParamStore};
pub use tensor::Tensor;
