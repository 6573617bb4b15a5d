//! Dense 2-D f64 tensors and the kernels behind the compute graph.
//!
//! Every kernel has a fixed per-element reduction order, so results are
//! bit-identical whether or not rayon splits the row loop across threads.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Row-parallel kernels only engage above this many multiply-adds;
/// below it the rayon overhead dominates.
const PAR_FLOP_THRESHOLD: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must match shape");
        Tensor { rows, cols, data }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor::from_vec(1, 1, vec![value])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_scalar(&self) -> bool {
        self.rows == 1 && self.cols == 1
    }

    pub fn scalar_value(&self) -> f64 {
        debug_assert!(self.is_scalar());
        self.data[0]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "elementwise op on {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul_elem(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, |a, b| a * b)
    }

    pub fn div_elem(&self, other: &Tensor) -> Result<Tensor> {
        self.zip(other, |a, b| a / b)
    }

    pub fn scale(&self, c: f64) -> Tensor {
        self.map(|v| v * c)
    }

    pub fn add_scalar(&self, c: f64) -> Tensor {
        self.map(|v| v + c)
    }

    pub fn neg(&self) -> Tensor {
        self.map(|v| -v)
    }

    pub fn transpose(&self) -> Tensor {
        let mut out = Tensor::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Matrix product with a deterministic reduction order. Each output
    /// row accumulates rank-1 updates over k in ascending order; rayon
    /// only splits the independent output rows.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "matmul {:?} x {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; m * n];
        let body = |i: usize, out_row: &mut [f64]| {
            let a_row = &self.data[i * k..(i + 1) * k];
            for (l, &a) in a_row.iter().enumerate() {
                // One-hot blocks make inputs zero-heavy; a skipped term
                // contributes exactly +0.0, so this never changes bits.
                if a != 0.0 {
                    let b_row = &other.data[l * n..(l + 1) * n];
                    for (o, &b) in out_row.iter_mut().zip(b_row) {
                        *o += a * b;
                    }
                }
            }
        };
        if m * k * n >= PAR_FLOP_THRESHOLD {
            out.par_chunks_mut(n)
                .enumerate()
                .for_each(|(i, row)| body(i, row));
        } else {
            for (i, row) in out.chunks_mut(n).enumerate() {
                body(i, row);
            }
        }
        Ok(Tensor::from_vec(m, n, out))
    }

    /// Sum over rows: (n, d) -> (1, d), summing row index ascending.
    pub fn sum_rows(&self) -> Tensor {
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (o, &v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        Tensor::from_vec(1, self.cols, out)
    }

    /// Sum over columns: (n, d) -> (n, 1), summing column index ascending.
    pub fn sum_cols(&self) -> Tensor {
        let mut out = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            out.push(self.row(r).iter().sum());
        }
        Tensor::from_vec(self.rows, 1, out)
    }

    /// Repeat a (1, d) row n times.
    pub fn broadcast_rows(&self, n: usize) -> Result<Tensor> {
        if self.rows != 1 {
            return Err(Error::Shape(format!(
                "broadcast_rows needs a (1, d) tensor, got {:?}",
                self.shape()
            )));
        }
        let mut data = Vec::with_capacity(n * self.cols);
        for _ in 0..n {
            data.extend_from_slice(&self.data);
        }
        Ok(Tensor::from_vec(n, self.cols, data))
    }

    /// Repeat a (n, 1) column d times.
    pub fn broadcast_cols(&self, d: usize) -> Result<Tensor> {
        if self.cols != 1 {
            return Err(Error::Shape(format!(
                "broadcast_cols needs a (n, 1) tensor, got {:?}",
                self.shape()
            )));
        }
        let mut data = Vec::with_capacity(self.rows * d);
        for r in 0..self.rows {
            for _ in 0..d {
                data.push(self.data[r]);
            }
        }
        Ok(Tensor::from_vec(self.rows, d, data))
    }
}
