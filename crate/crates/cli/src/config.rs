//! Run-config JSON: dataset path, schema declaration (column kinds,
//! sensitive/target bindings, derived-column rules), split spec, training
//! and evaluation settings, and the output directory. Training defaults
//! are pre-filled, so a minimal config is just paths plus the schema.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use fairsynth::error::{Error, Result};
use fairsynth::eval::EvalConfig;
use fairsynth::schema::{ColumnKind, DeriveRule, SplitSpec, TableSchema};
use fairsynth::trainer::TrainConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnDecl {
    pub name: String,
    pub kind: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitiveDecl {
    pub column: String,
    pub privileged: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetDecl {
    pub column: String,
    pub favorable: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaDecl {
    pub columns: Vec<ColumnDecl>,
    pub sensitive: SensitiveDecl,
    pub target: TargetDecl,
    #[serde(default)]
    pub derive: Vec<DeriveRule>,
}

impl SchemaDecl {
    pub fn to_table_schema(&self) -> Result<TableSchema> {
        let mut columns = Vec::with_capacity(self.columns.len());
        for decl in &self.columns {
            let kind = match decl.kind.to_ascii_lowercase().as_str() {
                "numeric" | "numerical" | "number" => ColumnKind::Numeric,
                "categorical" | "category" => ColumnKind::Categorical,
                other => {
                    return Err(Error::Config(format!(
                        "schema.columns[{:?}].kind: unknown kind {other:?} (expected numeric or categorical)",
                        decl.name
                    )))
                }
            };
            columns.push((decl.name.clone(), kind));
        }
        for rule in &self.derive {
            if !columns.iter().any(|(n, _)| n == &rule.column) {
                return Err(Error::Config(format!(
                    "schema.derive: column {:?} not in schema.columns",
                    rule.column
                )));
            }
        }
        TableSchema::new(
            columns,
            (self.sensitive.column.clone(), self.sensitive.privileged.clone()),
            (self.target.column.clone(), self.target.favorable.clone()),
        )
        .map_err(|e| Error::Config(format!("schema: {e}")))
    }
}

fn default_split() -> SplitSpec {
    SplitSpec {
        train_fraction: 0.8,
        seed: 0,
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/latest")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub schema: SchemaDecl,
    #[serde(default = "default_split")]
    pub split: SplitSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let run: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        run.validate()?;
        Ok(run)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "split.train_fraction: must be in (0,1), got {}",
                self.split.train_fraction
            )));
        }
        self.schema.to_table_schema()?;
        self.train.validate()?;
        self.eval.validate()?;
        Ok(())
    }

    /// The config with every default materialized, written next to run
    /// outputs so a run can be reproduced from its directory alone.
    pub fn resolved_snapshot(&self) -> RunConfig {
        let mut resolved = self.clone();
        let (pf_start, pf_end) = resolved.train.pf_window();
        resolved.train.pf_start = Some(pf_start);
        resolved.train.pf_end = Some(pf_end);
        resolved
    }
}
