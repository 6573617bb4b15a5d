//! Checkpoint container and its binary file format.
//!
//! Layout: magic "PFWG", version u32 LE, u64 LE length-prefixed UTF-8 JSON
//! header (schema, transform model, architectures, config, epoch, RNG
//! state, tensor manifest), then the tensors as contiguous little-endian
//! floats in header-declared order, then a CRC-32 of all preceding bytes.
//! Tensors are 32-bit floats unless the run is in deterministic mode,
//! which stores 64-bit so resumed runs stay bit-identical.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diff::params::{ParamEntry, ParamStore};
use crate::diff::tensor::Tensor;
use crate::error::{Error, Result};
use crate::losses::PrivacyReference;
use crate::networks::{CriticArch, GeneratorArch};
use crate::schema::TableSchema;
use crate::trainer::{RngState, TrainConfig};
use crate::transform::TransformModel;

pub const MAGIC: [u8; 4] = *b"PFWG";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub transform: TransformModel,
    pub generator_arch: GeneratorArch,
    pub critic_arch: CriticArch,
    pub generator: ParamStore,
    pub critic: ParamStore,
    pub config: TrainConfig,
    pub epoch: usize,
    pub global_step: u64,
    pub train_rows: usize,
    pub rng: RngState,
}

impl Checkpoint {
    pub fn schema(&self) -> &TableSchema {
        &self.transform.schema
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorDecl {
    name: String,
    rows: u64,
    cols: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ParamDecl {
    name: String,
    rows: u64,
    cols: u64,
    step: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    schema: TableSchema,
    transform: TransformModel,
    generator_arch: GeneratorArch,
    critic_arch: CriticArch,
    config: TrainConfig,
    epoch: u64,
    global_step: u64,
    train_rows: u64,
    rng: RngState,
    dtype: String,
    generator_params: Vec<ParamDecl>,
    generator_buffers: Vec<TensorDecl>,
    critic_params: Vec<ParamDecl>,
    critic_buffers: Vec<TensorDecl>,
    /// Optional cached privacy reference so resuming does not recompute
    /// the training-set nearest-neighbor distances.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    privacy: Option<PrivacyReference>,
}

fn param_decls(store: &ParamStore) -> Vec<ParamDecl> {
    store
        .params
        .iter()
        .map(|e| ParamDecl {
            name: e.name.clone(),
            rows: e.value.rows() as u64,
            cols: e.value.cols() as u64,
            step: e.step,
        })
        .collect()
}

fn buffer_decls(store: &ParamStore) -> Vec<TensorDecl> {
    store
        .buffers
        .iter()
        .map(|(n, t)| TensorDecl {
            name: n.clone(),
            rows: t.rows() as u64,
            cols: t.cols() as u64,
        })
        .collect()
}

fn write_tensor(buf: &mut Vec<u8>, t: &Tensor, f64_mode: bool) {
    if f64_mode {
        for &v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    } else {
        for &v in t.data() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
}

struct TensorReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    f64_mode: bool,
}

impl<'a> TensorReader<'a> {
    fn read(&mut self, rows: usize, cols: usize) -> Result<Tensor> {
        let count = rows * cols;
        let width = if self.f64_mode { 8 } else { 4 };
        let need = count * width;
        if self.pos + need > self.bytes.len() {
            return Err(Error::Checkpoint("tensor payload truncated".into()));
        }
        let mut data = Vec::with_capacity(count);
        for i in 0..count {
            let at = self.pos + i * width;
            let v = if self.f64_mode {
                f64::from_le_bytes(self.bytes[at..at + 8].try_into().unwrap())
            } else {
                f32::from_le_bytes(self.bytes[at..at + 4].try_into().unwrap()) as f64
            };
            data.push(v);
        }
        self.pos += need;
        Ok(Tensor::from_vec(rows, cols, data))
    }
}

fn encode(cp: &Checkpoint, privacy: Option<&PrivacyReference>) -> Result<Vec<u8>> {
    let f64_mode = cp.config.deterministic;
    let header = Header {
        schema: cp.transform.schema.clone(),
        transform: cp.transform.clone(),
        generator_arch: cp.generator_arch.clone(),
        critic_arch: cp.critic_arch.clone(),
        config: cp.config.clone(),
        epoch: cp.epoch as u64,
        global_step: cp.global_step,
        train_rows: cp.train_rows as u64,
        rng: cp.rng.clone(),
        dtype: if f64_mode { "f64" } else { "f32" }.into(),
        generator_params: param_decls(&cp.generator),
        generator_buffers: buffer_decls(&cp.generator),
        critic_params: param_decls(&cp.critic),
        critic_buffers: buffer_decls(&cp.critic),
        privacy: privacy.cloned(),
    };
    let header_bytes = serde_json::to_vec(&header)?;

    let mut buf = Vec::new();
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
    buf.extend_from_slice(&header_bytes);
    for store in [&cp.generator, &cp.critic] {
        for entry in &store.params {
            write_tensor(&mut buf, &entry.value, f64_mode);
            write_tensor(&mut buf, &entry.m, f64_mode);
            write_tensor(&mut buf, &entry.v, f64_mode);
        }
        for (_, t) in &store.buffers {
            write_tensor(&mut buf, t, f64_mode);
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(buf)
}

fn decode(bytes: &[u8]) -> Result<(Checkpoint, Option<PrivacyReference>)> {
    if bytes.len() < 4 + 4 + 8 + 4 {
        return Err(Error::Checkpoint("file too short".into()));
    }
    if bytes[0..4] != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version} (expected {VERSION})"
        )));
    }
    let body = &bytes[..bytes.len() - 4];
    let stored_crc = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    if crc32fast::hash(body) != stored_crc {
        return Err(Error::Checkpoint("checksum failure".into()));
    }

    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    if 16 + header_len > body.len() {
        return Err(Error::Checkpoint("header length out of range".into()));
    }
    let header: Header = serde_json::from_slice(&bytes[16..16 + header_len])?;
    if header.schema != header.transform.schema {
        return Err(Error::Checkpoint(
            "schema does not match the transform model".into(),
        ));
    }
    let f64_mode = match header.dtype.as_str() {
        "f32" => false,
        "f64" => true,
        other => {
            return Err(Error::Checkpoint(format!("unknown tensor dtype {other:?}")));
        }
    };

    let mut reader = TensorReader {
        bytes: body,
        pos: 16 + header_len,
        f64_mode,
    };
    let mut read_store =
        |params: &[ParamDecl], buffers: &[TensorDecl]| -> Result<ParamStore> {
            let mut store = ParamStore::new();
            for decl in params {
                let value = reader.read(decl.rows as usize, decl.cols as usize)?;
                let m = reader.read(decl.rows as usize, decl.cols as usize)?;
                let v = reader.read(decl.rows as usize, decl.cols as usize)?;
                store.params.push(ParamEntry {
                    name: decl.name.clone(),
                    value,
                    m,
                    v,
                    step: decl.step,
                });
            }
            for decl in buffers {
                let t = reader.read(decl.rows as usize, decl.cols as usize)?;
                store.buffers.push((decl.name.clone(), t));
            }
            Ok(store)
        };

    let generator = read_store(&header.generator_params, &header.generator_buffers)?;
    let critic = read_store(&header.critic_params, &header.critic_buffers)?;
    if reader.pos != body.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after tensor payload",
            body.len() - reader.pos
        )));
    }

    Ok((
        Checkpoint {
            transform: header.transform,
            generator_arch: header.generator_arch,
            critic_arch: header.critic_arch,
            generator,
            critic,
            config: header.config,
            epoch: header.epoch as usize,
            global_step: header.global_step,
            train_rows: header.train_rows as usize,
            rng: header.rng,
        },
        header.privacy,
    ))
}

/// Atomic save: write to a temp file in the target directory, then rename.
pub fn save_checkpoint(cp: &Checkpoint, path: &Path) -> Result<()> {
    save_checkpoint_with_privacy(cp, None, path)
}

pub fn save_checkpoint_with_privacy(
    cp: &Checkpoint,
    privacy: Option<&PrivacyReference>,
    path: &Path,
) -> Result<()> {
    let bytes = encode(cp, privacy)?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Ok(decode(&fs::read(path)?)?.0)
}

pub fn load_checkpoint_with_privacy(
    path: &Path,
) -> Result<(Checkpoint, Option<PrivacyReference>)> {
    decode(&fs::read(path)?)
}
