//! Named parameter stores with Adam state, plus non-trainable buffers
//! (batch-norm running statistics). Iteration order is insertion order
//! and is preserved across checkpoint round trips.

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub value: Tensor,
    /// Adam first moment.
    pub m: Tensor,
    /// Adam second moment.
    pub v: Tensor,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    pub params: Vec<ParamEntry>,
    pub buffers: Vec<(String, Tensor)>,
}

pub const ADAM_EPS: f64 = 1e-8;

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_param(&mut self, name: impl Into<String>, value: Tensor) {
        let (r, c) = value.shape();
        self.params.push(ParamEntry {
            name: name.into(),
            value,
            m: Tensor::zeros(r, c),
            v: Tensor::zeros(r, c),
            step: 0,
        });
    }

    pub fn add_buffer(&mut self, name: impl Into<String>, value: Tensor) {
        self.buffers.push((name.into(), value));
    }

    pub fn param(&self, name: &str) -> &Tensor {
        &self
            .params
            .iter()
            .find(|e| e.name == name)
            .unwrap_or_else(|| panic!("unknown parameter {name:?}"))
            .value
    }

    pub fn buffer(&self, name: &str) -> &Tensor {
        &self
            .buffers
            .iter()
            .find(|(n, _)| n == name)
            .unwrap_or_else(|| panic!("unknown buffer {name:?}"))
            .1
    }

    pub fn buffer_mut(&mut self, name: &str) -> &mut Tensor {
        &mut self
            .buffers
            .iter_mut()
            .find(|(n, _)| n == name)
            .unwrap_or_else(|| panic!("unknown buffer {name:?}"))
            .1
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }
}

/// One Adam update over every parameter in the store. `grads` must align
/// with the store's iteration order.
pub fn adam_step(
    store: &mut ParamStore,
    grads: &[Tensor],
    lr: f64,
    beta1: f64,
    beta2: f64,
) -> Result<()> {
    if grads.len() != store.params.len() {
        return Err(Error::Shape(format!(
            "{} gradients for {} parameters",
            grads.len(),
            store.params.len()
        )));
    }
    for (entry, grad) in store.params.iter_mut().zip(grads) {
        if grad.shape() != entry.value.shape() {
            return Err(Error::Shape(format!(
                "gradient shape {:?} does not match parameter {:?} of shape {:?}",
                grad.shape(),
                entry.name,
                entry.value.shape()
            )));
        }
        if !grad.all_finite() {
            return Err(Error::NonFinite {
                context: format!("gradient of {}", entry.name),
            });
        }
        entry.step += 1;
        let bc1 = 1.0 - beta1.powi(entry.step as i32);
        let bc2 = 1.0 - beta2.powi(entry.step as i32);
        let value = entry.value.data_mut();
        let m = entry.m.data_mut();
        let v = entry.v.data_mut();
        for i in 0..value.len() {
            let g = grad.data()[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            value[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
    Ok(())
}
