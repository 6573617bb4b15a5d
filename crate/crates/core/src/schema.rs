//! Table schemas, CSV ingestion, deterministic splits, and group counts.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

/// One cell of a raw table. Numeric columns hold finite reals,
/// categorical columns hold strings.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Number(f64),
    Text(String),
}

impl Cell {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Number(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Cell::Number(_) => None,
            Cell::Text(s) => Some(s),
        }
    }
}

/// Column layout plus the sensitive and target bindings used for
/// fairness accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSchema {
    pub columns: Vec<(String, ColumnKind)>,
    /// (column name, privileged category value). Rows whose sensitive cell
    /// equals the privileged value form the s=1 group; everything else is s=0.
    pub sensitive: (String, String),
    /// (column name, favorable category value). Rows whose target cell equals
    /// the favorable value form the y=1 group.
    pub target: (String, String),
}

impl TableSchema {
    pub fn new(
        columns: Vec<(String, ColumnKind)>,
        sensitive: (String, String),
        target: (String, String),
    ) -> Result<Self> {
        let schema = TableSchema {
            columns,
            sensitive,
            target,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::SchemaMismatch("schema has no columns".into()));
        }
        let mut seen = HashSet::new();
        for (name, _) in &self.columns {
            if !seen.insert(name.as_str()) {
                return Err(Error::SchemaMismatch(format!(
                    "duplicate column name {name:?}"
                )));
            }
        }
        for (role, name) in [("sensitive", &self.sensitive.0), ("target", &self.target.0)] {
            match self.column_kind(name) {
                None => {
                    return Err(Error::SchemaMismatch(format!(
                        "{role} column {name:?} not in schema"
                    )))
                }
                Some(ColumnKind::Numeric) => {
                    return Err(Error::SchemaMismatch(format!(
                        "{role} column {name:?} must be categorical"
                    )))
                }
                Some(ColumnKind::Categorical) => {}
            }
        }
        if self.sensitive.0 == self.target.0 {
            return Err(Error::SchemaMismatch(
                "sensitive and target columns must be distinct".into(),
            ));
        }
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|(n, _)| n == name)
    }

    pub fn column_kind(&self, name: &str) -> Option<ColumnKind> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, k)| *k)
    }

    pub fn sensitive_index(&self) -> usize {
        self.column_index(&self.sensitive.0).expect("validated")
    }

    pub fn target_index(&self) -> usize {
        self.column_index(&self.target.0).expect("validated")
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }
}

/// A column derivation applied at ingestion, before schema binding.
/// Maps a numeric raw column onto two category labels by threshold,
/// e.g. age -> older/younger at 25.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeriveRule {
    pub column: String,
    pub threshold: f64,
    /// Label when the raw value is strictly greater than the threshold.
    pub above_label: String,
    /// Label when the raw value is less than or equal to the threshold.
    pub below_label: String,
}

/// An in-memory table bound to a schema. Every row has a cell for every
/// schema column; incomplete rows are dropped at ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub schema: TableSchema,
    pub rows: Vec<Vec<Cell>>,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// True when the row's sensitive cell equals the privileged value.
    pub fn is_privileged(&self, row: usize) -> bool {
        let idx = self.schema.sensitive_index();
        self.rows[row][idx].as_text() == Some(self.schema.sensitive.1.as_str())
    }

    /// True when the row's target cell equals the favorable value.
    pub fn is_favorable(&self, row: usize) -> bool {
        let idx = self.schema.target_index();
        self.rows[row][idx].as_text() == Some(self.schema.target.1.as_str())
    }
}

/// Group counts over the sensitive/target binarization:
/// (n_s0y1, n_s0, n_s1y1, n_s1).
pub type GroupCounts = (usize, usize, usize, usize);

/// Count rows by sensitive group and favorable outcome. s=1 means the
/// sensitive cell equals the privileged value, y=1 means the target cell
/// equals the favorable value.
pub fn group_counts(table: &RawTable) -> GroupCounts {
    let mut n_s0y1 = 0;
    let mut n_s0 = 0;
    let mut n_s1y1 = 0;
    let mut n_s1 = 0;
    for row in 0..table.n_rows() {
        let s1 = table.is_privileged(row);
        let y1 = table.is_favorable(row);
        if s1 {
            n_s1 += 1;
            if y1 {
                n_s1y1 += 1;
            }
        } else {
            n_s0 += 1;
            if y1 {
                n_s0y1 += 1;
            }
        }
    }
    (n_s0y1, n_s0, n_s1y1, n_s1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

/// Outcome of CSV ingestion: the bound table plus how many file rows were
/// dropped for missing or unparsable cells.
#[derive(Debug)]
pub struct LoadOutcome {
    pub table: RawTable,
    pub dropped_rows: usize,
}

/// Load a CSV file and bind it to the schema. Rows with empty or
/// unparsable cells (including non-finite numerics) are dropped and
/// counted. Derive rules are applied to raw string cells before kind
/// binding, so a rule target column is declared Categorical in the schema.
pub fn load_csv(path: &Path, schema: &TableSchema, rules: &[DeriveRule]) -> Result<LoadOutcome> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let mut col_pos = Vec::with_capacity(schema.n_columns());
    for (name, _) in &schema.columns {
        match headers.iter().position(|h| h.trim() == name) {
            Some(p) => col_pos.push(p),
            None => {
                return Err(Error::SchemaMismatch(format!(
                    "column {name:?} missing from CSV header"
                )))
            }
        }
    }

    let mut rows = Vec::new();
    let mut dropped = 0usize;
    'records: for record in reader.records() {
        let record = record?;
        let mut row = Vec::with_capacity(schema.n_columns());
        for (ci, (name, kind)) in schema.columns.iter().enumerate() {
            let raw = match record.get(col_pos[ci]) {
                Some(v) => v.trim(),
                None => {
                    dropped += 1;
                    continue 'records;
                }
            };
            if raw.is_empty() || raw == "?" {
                dropped += 1;
                continue 'records;
            }
            let rule = rules.iter().find(|r| &r.column == name);
            let cell = match (rule, kind) {
                (Some(rule), ColumnKind::Categorical) => match raw.parse::<f64>() {
                    Ok(v) if v.is_finite() => {
                        if v > rule.threshold {
                            Cell::Text(rule.above_label.clone())
                        } else {
                            Cell::Text(rule.below_label.clone())
                        }
                    }
                    _ => {
                        dropped += 1;
                        continue 'records;
                    }
                },
                (Some(rule), ColumnKind::Numeric) => {
                    return Err(Error::SchemaMismatch(format!(
                        "derive rule for {:?} requires the column to be categorical",
                        rule.column
                    )))
                }
                (None, ColumnKind::Numeric) => match raw.parse::<f64>() {
                    Ok(v) if v.is_finite() => Cell::Number(v),
                    _ => {
                        dropped += 1;
                        continue 'records;
                    }
                },
                (None, ColumnKind::Categorical) => Cell::Text(raw.to_string()),
            };
            row.push(cell);
        }
        rows.push(row);
    }

    if rows.is_empty() {
        return Err(Error::EmptyTable(format!(
            "no rows survived ingestion of {}",
            path.display()
        )));
    }
    Ok(LoadOutcome {
        table: RawTable {
            schema: schema.clone(),
            rows,
        },
        dropped_rows: dropped,
    })
}

/// Write a table back to CSV. Numbers are printed with the shortest
/// representation that parses back exactly, so a write/load cycle is the
/// identity.
pub fn write_csv(table: &RawTable, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(table.schema.columns.iter().map(|(n, _)| n.as_str()))?;
    let mut buf = String::new();
    for row in &table.rows {
        buf.clear();
        let record = row.iter().map(|cell| match cell {
            Cell::Number(v) => {
                buf = format!("{v}");
                buf.clone()
            }
            Cell::Text(s) => s.clone(),
        });
        writer.write_record(record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Deterministic train/test split: shuffle row indices with the seeded
/// generator, take the first ceil(n * train_fraction) as train.
pub fn split(table: &RawTable, spec: &SplitSpec) -> Result<(RawTable, RawTable)> {
    if table.n_rows() == 0 {
        return Err(Error::EmptyTable("cannot split an empty table".into()));
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::SplitDegenerate(format!(
            "train_fraction must be in (0,1), got {}",
            spec.train_fraction
        )));
    }
    let n = table.n_rows();
    let n_train = (n as f64 * spec.train_fraction).ceil() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::SplitDegenerate(format!(
            "split of {n} rows at fraction {} leaves an empty half",
            spec.train_fraction
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    indices.shuffle(&mut rng);

    let take = |idx: &[usize]| RawTable {
        schema: table.schema.clone(),
        rows: idx.iter().map(|&i| table.rows[i].clone()).collect(),
    };
    Ok((take(&indices[..n_train]), take(&indices[n_train..])))
}
