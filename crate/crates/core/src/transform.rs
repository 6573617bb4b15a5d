//! Invertible encoding between raw tables and the real-valued vector
//! space the networks, losses, and metrics operate in. Numeric columns go
//! through an empirical quantile map onto [0,1]; categorical columns are
//! one-hot encoded against a vocabulary fixed at fit time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{Cell, ColumnKind, RawTable, TableSchema};

/// Empirical quantile map for one numeric column. Stores the full sorted
/// training column (with duplicates) so the forward map is the mid-rank
/// empirical CDF and the inverse is interpolation into the sorted values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileMap {
    pub column: String,
    pub sorted_values: Vec<f64>,
}

impl QuantileMap {
    pub fn resolution(&self) -> usize {
        self.sorted_values.len()
    }

    /// Mid-rank empirical CDF value in [0,1]. Out-of-range inputs clamp
    /// to the endpoints.
    pub fn forward(&self, x: f64) -> f64 {
        let n = self.sorted_values.len();
        let rank_low = self.sorted_values.partition_point(|&v| v < x);
        let rank_high = self.sorted_values.partition_point(|&v| v <= x);
        let u = (rank_low + rank_high) as f64 / (2.0 * n as f64);
        u.clamp(0.0, 1.0)
    }

    /// Linear interpolation into the sorted training values at position
    /// u * (resolution - 1). Inputs are clamped to [0,1].
    pub fn inverse(&self, u: f64) -> f64 {
        let n = self.sorted_values.len();
        if n == 1 {
            return self.sorted_values[0];
        }
        let u = u.clamp(0.0, 1.0);
        let pos = u * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        if lo == hi {
            return self.sorted_values[lo];
        }
        let frac = pos - lo as f64;
        self.sorted_values[lo] * (1.0 - frac) + self.sorted_values[hi] * frac
    }
}

/// Vocabulary for one categorical column, in first-appearance order over
/// the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryVocab {
    pub column: String,
    pub categories: Vec<String>,
}

impl CategoryVocab {
    pub fn cardinality(&self) -> usize {
        self.categories.len()
    }

    pub fn index_of(&self, value: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == value)
    }
}

/// Contiguous column span inside the encoded vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpan {
    pub start: usize,
    pub len: usize,
}

impl ColumnSpan {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

/// Fitted, invertible encoding. `layout[i]` is the encoded span of schema
/// column `i`; numeric spans have length 1, categorical spans have length
/// equal to the vocabulary cardinality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformModel {
    pub schema: TableSchema,
    pub quantile_maps: Vec<QuantileMap>,
    pub vocabs: Vec<CategoryVocab>,
    pub encoded_width: usize,
    pub layout: Vec<ColumnSpan>,
}

/// Row-major real matrix in the encoded space. Numeric coordinates live
/// in [0,1]; each categorical block is a probability vector, one-hot when
/// the matrix is hard-encoded.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    pub n_rows: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl DataMatrix {
    pub fn zeros(n_rows: usize, width: usize) -> Self {
        DataMatrix {
            n_rows,
            width,
            values: vec![0.0; n_rows * width],
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.width..(i + 1) * self.width]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.width..(i + 1) * self.width]
    }

    pub fn to_tensor(&self) -> crate::diff::tensor::Tensor {
        crate::diff::tensor::Tensor::from_vec(self.n_rows, self.width, self.values.clone())
    }

    pub fn from_tensor(t: &crate::diff::tensor::Tensor) -> Self {
        DataMatrix {
            n_rows: t.rows(),
            width: t.cols(),
            values: t.data().to_vec(),
        }
    }

    /// Check the encoded-space invariants against a model layout: numeric
    /// coordinates in [0,1], categorical blocks non-negative and summing
    /// to one within `1e-6`. With `hard` set, categorical blocks must be
    /// exactly one-hot.
    pub fn validate(&self, model: &TransformModel, hard: bool) -> Result<()> {
        if self.width != model.encoded_width {
            return Err(Error::Shape(format!(
                "matrix width {} != encoded width {}",
                self.width, model.encoded_width
            )));
        }
        for r in 0..self.n_rows {
            let row = self.row(r);
            for (ci, (name, kind)) in model.schema.columns.iter().enumerate() {
                let span = model.layout[ci];
                match kind {
                    ColumnKind::Numeric => {
                        let v = row[span.start];
                        if !(0.0..=1.0).contains(&v) {
                            return Err(Error::Contract(format!(
                                "numeric coordinate {v} for column {name:?} outside [0,1]"
                            )));
                        }
                    }
                    ColumnKind::Categorical => {
                        let block = &row[span.start..span.end()];
                        let sum: f64 = block.iter().sum();
                        if block.iter().any(|&v| v < 0.0) || (sum - 1.0).abs() > 1e-6 {
                            return Err(Error::Contract(format!(
                                "categorical block for column {name:?} is not a probability vector (sum {sum})"
                            )));
                        }
                        if hard && !block.iter().all(|&v| v == 0.0 || v == 1.0) {
                            return Err(Error::Contract(format!(
                                "categorical block for column {name:?} is not one-hot"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Fit quantile maps and vocabularies from the training split only.
pub fn fit(train: &RawTable) -> Result<TransformModel> {
    if train.n_rows() == 0 {
        return Err(Error::Fit("cannot fit a transform on an empty table".into()));
    }
    let schema = train.schema.clone();
    let mut quantile_maps = Vec::new();
    let mut vocabs = Vec::new();
    let mut layout = Vec::with_capacity(schema.n_columns());
    let mut offset = 0usize;

    for (ci, (name, kind)) in schema.columns.iter().enumerate() {
        match kind {
            ColumnKind::Numeric => {
                let mut values: Vec<f64> = train
                    .rows
                    .iter()
                    .filter_map(|r| r[ci].as_number())
                    .filter(|v| v.is_finite())
                    .collect();
                if values.is_empty() {
                    return Err(Error::Fit(format!(
                        "numeric column {name:?} has no finite values"
                    )));
                }
                values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
                quantile_maps.push(QuantileMap {
                    column: name.clone(),
                    sorted_values: values,
                });
                layout.push(ColumnSpan {
                    start: offset,
                    len: 1,
                });
                offset += 1;
            }
            ColumnKind::Categorical => {
                let mut categories: Vec<String> = Vec::new();
                for row in &train.rows {
                    if let Some(v) = row[ci].as_text() {
                        if !categories.iter().any(|c| c == v) {
                            categories.push(v.to_string());
                        }
                    }
                }
                if categories.is_empty() {
                    return Err(Error::Fit(format!(
                        "categorical column {name:?} has no values"
                    )));
                }
                let card = categories.len();
                vocabs.push(CategoryVocab {
                    column: name.clone(),
                    categories,
                });
                layout.push(ColumnSpan {
                    start: offset,
                    len: card,
                });
                offset += card;
            }
        }
    }

    Ok(TransformModel {
        schema,
        quantile_maps,
        vocabs,
        encoded_width: offset,
        layout,
    })
}

impl TransformModel {
    fn numeric_map(&self, column: &str) -> &QuantileMap {
        self.quantile_maps
            .iter()
            .find(|q| q.column == column)
            .expect("fit covers every numeric column")
    }

    fn vocab(&self, column: &str) -> &CategoryVocab {
        self.vocabs
            .iter()
            .find(|v| v.column == column)
            .expect("fit covers every categorical column")
    }

    /// Span of a column by name.
    pub fn span_of(&self, column: &str) -> Option<ColumnSpan> {
        self.schema.column_index(column).map(|i| self.layout[i])
    }

    /// Encoded index of a specific category of a categorical column.
    pub fn category_coordinate(&self, column: &str, value: &str) -> Option<usize> {
        let span = self.span_of(column)?;
        let idx = self.vocab(column).index_of(value)?;
        Some(span.start + idx)
    }
}

/// Encode a table into the model's vector space. Unseen categories are an
/// error; out-of-range numerics clamp to the endpoints.
pub fn encode(table: &RawTable, model: &TransformModel) -> Result<DataMatrix> {
    if table.schema != model.schema {
        return Err(Error::SchemaMismatch(
            "table schema does not match transform model".into(),
        ));
    }
    let mut matrix = DataMatrix::zeros(table.n_rows(), model.encoded_width);
    for (ri, row) in table.rows.iter().enumerate() {
        let out = matrix.row_mut(ri);
        for (ci, (name, kind)) in model.schema.columns.iter().enumerate() {
            let span = model.layout[ci];
            match kind {
                ColumnKind::Numeric => {
                    let x = row[ci].as_number().ok_or_else(|| {
                        Error::SchemaMismatch(format!("expected number in column {name:?}"))
                    })?;
                    out[span.start] = model.numeric_map(name).forward(x);
                }
                ColumnKind::Categorical => {
                    let v = row[ci].as_text().ok_or_else(|| {
                        Error::SchemaMismatch(format!("expected text in column {name:?}"))
                    })?;
                    let idx =
                        model
                            .vocab(name)
                            .index_of(v)
                            .ok_or_else(|| Error::UnseenCategory {
                                column: name.clone(),
                                value: v.to_string(),
                            })?;
                    out[span.start + idx] = 1.0;
                }
            }
        }
    }
    Ok(matrix)
}

/// Decode a matrix back to raw space: numerics interpolate into the
/// sorted training values, categorical blocks take the argmax category
/// (ties resolve to the lowest index). Inputs are clamped, never errors.
pub fn decode(matrix: &DataMatrix, model: &TransformModel) -> Result<RawTable> {
    if matrix.width != model.encoded_width {
        return Err(Error::Shape(format!(
            "matrix width {} != encoded width {}",
            matrix.width, model.encoded_width
        )));
    }
    let mut rows = Vec::with_capacity(matrix.n_rows);
    for ri in 0..matrix.n_rows {
        let enc = matrix.row(ri);
        let mut row = Vec::with_capacity(model.schema.n_columns());
        for (ci, (name, kind)) in model.schema.columns.iter().enumerate() {
            let span = model.layout[ci];
            match kind {
                ColumnKind::Numeric => {
                    let u = enc[span.start];
                    row.push(Cell::Number(model.numeric_map(name).inverse(u)));
                }
                ColumnKind::Categorical => {
                    let block = &enc[span.start..span.end()];
                    let mut best = 0usize;
                    for (i, &v) in block.iter().enumerate() {
                        if v > block[best] {
                            best = i;
                        }
                    }
                    let vocab = model.vocab(name);
                    row.push(Cell::Text(vocab.categories[best].clone()));
                }
            }
        }
        rows.push(row);
    }
    Ok(RawTable {
        schema: model.schema.clone(),
        rows,
    })
}
