use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::Model;
use super::params::{ModelConfig, ParamStore};
use super::train::EpochStats;
use crate::graph::GraphVariant;

const MAGIC: &[u8; 8] = b"STORDCKP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic bytes)")]
    BadMagic,
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint is truncated at byte {offset}")]
    Truncated { offset: usize },
    #[error("bad checkpoint header: {0}")]
    Header(String),
    #[error("bad checkpoint parameters: {0}")]
    Params(String),
    #[error("checkpoint was trained on graph variant {trained}, refusing to run it as {requested} (use --force to override)")]
    VariantMismatch {
        trained: GraphVariant,
        requested: GraphVariant,
    },
}

/// How the inputs to a model were produced; needed to rebuild them at
/// inference time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub variant: GraphVariant,
    pub seed: u64,
    pub coref: bool,
    /// Embedder spec, e.g. `hash` or `file:<path>`.
    pub embedder: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    model: ModelConfig,
    run: RunInfo,
    best_epoch: usize,
    history: Vec<EpochStats>,
    n_params: usize,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: ModelConfig,
    pub run: RunInfo,
    pub params: ParamStore<f32>,
    pub best_epoch: usize,
    pub history: Vec<EpochStats>,
}

impl Checkpoint {
    pub fn to_model(&self) -> Result<Model<f32>, CheckpointError> {
        Model::new(self.model, self.params.clone()).map_err(|e| CheckpointError::Params(e.to_string()))
    }

    pub fn check_variant(&self, requested: GraphVariant, force: bool) -> Result<(), CheckpointError> {
        if requested != self.run.variant && !force {
            return Err(CheckpointError::VariantMismatch {
                trained: self.run.variant,
                requested,
            });
        }
        Ok(())
    }

    /// Layout: magic, u32 version, u32 header length, JSON header, then per
    /// parameter: u32 name length, name, u32 rows, u32 cols, f32 values.
    /// All integers and floats little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            model: self.model,
            run: self.run.clone(),
            best_epoch: self.best_epoch,
            history: self.history.clone(),
            n_params: self.params.len(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(16 + json.len() + self.params.n_values() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for p in self.params.iter() {
            out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
            out.extend_from_slice(p.name.as_bytes());
            out.extend_from_slice(&(p.rows as u32).to_le_bytes());
            out.extend_from_slice(&(p.cols as u32).to_le_bytes());
            for x in &p.data {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::Version {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let len = r.u32()? as usize;
        let header: Header =
            serde_json::from_slice(r.take(len)?).map_err(|e| CheckpointError::Header(e.to_string()))?;
        let mut params = ParamStore::new();
        for _ in 0..header.n_params {
            let name_len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| CheckpointError::Params("parameter name is not UTF-8".into()))?
                .to_string();
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let raw = r.take(rows * cols * 4)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if params.find(&name).is_some() {
                return Err(CheckpointError::Params(format!("duplicate parameter {name}")));
            }
            params.add(&name, rows, cols, data);
        }
        if r.pos != bytes.len() {
            return Err(CheckpointError::Params(format!(
                "{} trailing bytes after the last parameter",
                bytes.len() - r.pos
            )));
        }
        let ckpt = Checkpoint {
            model: header.model,
            run: header.run,
            params,
            best_epoch: header.best_epoch,
            history: header.history,
        };
        ckpt.to_model()?;
        Ok(ckpt)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(CheckpointError::Truncated {
                offset: self.bytes.len(),
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Writes via a temporary sibling file so a failed write leaves no partial
/// checkpoint behind.
pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<(), CheckpointError> {
    let tmp = path.with_extension("partial");
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&ckpt.to_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    Checkpoint::from_bytes(&fs::read(path)?)
}
