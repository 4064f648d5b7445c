//! `PCM1` checkpoint container: magic, little-endian `u32` header length, a
//! JSON header (configuration, frontend, alphabets, tensor table) and the
//! tensors as little-endian `f64` in table order.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Frontend;
use crate::labelset::LabelInventory;

use super::{ModelConfig, ModelParams};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"PCM1";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub frontend: Frontend,
    pub alphabets: BTreeMap<String, String>,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn inventory(&self) -> Result<LabelInventory> {
        LabelInventory::from_strs(self.alphabets.iter().map(|(k, v)| (k.as_str(), v.as_str())))
    }
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config: ModelConfig,
    frontend: Frontend,
    alphabets: BTreeMap<String, String>,
    tensors: Vec<TensorEntry>,
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    ckpt.params.check_shapes(&ckpt.config)?;
    let tensors = ckpt.params.tensors();
    let header = Header {
        format_version: FORMAT_VERSION,
        config: ckpt.config.clone(),
        frontend: ckpt.frontend,
        alphabets: ckpt.alphabets.clone(),
        tensors: tensors
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.clone(),
                rows: t.rows(),
                cols: t.cols(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Serde(e.to_string()))?;
    let mut bytes = Vec::with_capacity(8 + json.len() + 8 * ckpt.params.num_values());
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&(json.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&json);
    for (_, t) in &tensors {
        for v in t.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: String| Error::malformed(path, reason);
    if bytes.len() < 8 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(bad("missing PCM1 magic".into()));
    }
    let header_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let header_end = 8usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| bad("truncated header".into()))?;
    let header: Header =
        serde_json::from_slice(&bytes[8..header_end]).map_err(|e| bad(e.to_string()))?;
    if header.format_version != FORMAT_VERSION {
        return Err(bad(format!("unsupported version {}", header.format_version)));
    }
    header.config.validate().map_err(|e| bad(e.to_string()))?;
    LabelInventory::from_strs(header.alphabets.iter().map(|(k, v)| (k.as_str(), v.as_str())))
        .map_err(|e| bad(e.to_string()))?;

    let mut params = ModelParams::init(&header.config, 0)?;
    let mut offset = header_end;
    {
        let mut slots = params.tensors_mut();
        if slots.len() != header.tensors.len() {
            return Err(bad(format!(
                "{} tensors stored, configuration needs {}",
                header.tensors.len(),
                slots.len()
            )));
        }
        for ((name, slot), entry) in slots.iter_mut().zip(&header.tensors) {
            if *name != entry.name || slot.shape() != (entry.rows, entry.cols) {
                return Err(bad(format!(
                    "tensor {} {}x{} does not match expected {name} {:?}",
                    entry.name,
                    entry.rows,
                    entry.cols,
                    slot.shape()
                )));
            }
            let n = entry.rows * entry.cols;
            let end = offset + 8 * n;
            if end > bytes.len() {
                return Err(bad(format!("payload truncated in {name}")));
            }
            for (v, chunk) in slot.data_mut().iter_mut().zip(bytes[offset..end].chunks_exact(8)) {
                *v = f64::from_le_bytes(chunk.try_into().unwrap());
            }
            offset = end;
        }
    }
    if offset != bytes.len() {
        return Err(bad(format!("{} trailing bytes", bytes.len() - offset)));
    }
    if !params.all_finite() {
        return Err(bad("non-finite parameter".into()));
    }
    Ok(Checkpoint {
        config: header.config,
        frontend: header.frontend,
        alphabets: header.alphabets,
        params,
    })
}
