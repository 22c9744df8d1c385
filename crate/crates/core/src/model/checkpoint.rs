//! Checkpoint container: magic, version, JSON header, raw little-endian f64
//! values for parameters and Adam moments, CRC-32 trailer.

use super::optim::{Adam, AdamConfig};
use super::tensor::Tensor;
use super::{Model, ModelConfig, ModelError, ModelParams};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

const MAGIC: &[u8; 4] = b"SFCK";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    tensors: Vec<(String, usize, usize)>,
    adam: AdamConfig,
    adam_step: u64,
    seed: u64,
    meta: BTreeMap<String, String>,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: Model,
    pub adam: Adam,
    pub seed: u64,
    /// Free-form notes, e.g. the config hash of the shards trained on.
    pub meta: BTreeMap<String, String>,
}

fn corrupt(msg: impl Into<String>) -> ModelError {
    ModelError::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.model.params;
        let header = Header {
            config: self.model.config,
            tensors: p.names.iter().zip(&p.values).map(|(n, t)| (n.clone(), t.rows, t.cols)).collect(),
            adam: self.adam.config,
            adam_step: self.adam.step,
            seed: self.seed,
            meta: self.meta.clone(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(json.len() + 24 * p.scalar_count() + 16);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for set in [&p.values, &self.adam.m, &self.adam.v] {
            for t in set {
                for v in &t.data {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        if bytes.len() < 14 || &bytes[..4] != MAGIC {
            return Err(corrupt("not a checkpoint"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != CHECKPOINT_VERSION {
            return Err(corrupt(format!("checkpoint version {version}, expected {CHECKPOINT_VERSION}")));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 4);
        if crc32fast::hash(body) != u32::from_le_bytes(trailer.try_into().unwrap()) {
            return Err(corrupt("checksum mismatch"));
        }
        let hlen = u32::from_le_bytes(body[6..10].try_into().unwrap()) as usize;
        let json = body.get(10..10 + hlen).ok_or_else(|| corrupt("truncated header"))?;
        let header: Header = serde_json::from_slice(json).map_err(|e| corrupt(e.to_string()))?;
        let mut floats = body[10 + hlen..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        if (body.len() - 10 - hlen) % 8 != 0 {
            return Err(corrupt("payload not a whole number of f64"));
        }
        let mut read_set = || -> Result<Vec<Tensor>, ModelError> {
            header
                .tensors
                .iter()
                .map(|(_, r, c)| {
                    let data: Vec<f64> = floats.by_ref().take(r * c).collect();
                    if data.len() != r * c {
                        return Err(corrupt("truncated payload"));
                    }
                    Ok(Tensor::from_vec(*r, *c, data))
                })
                .collect()
        };
        let values = read_set()?;
        let m = read_set()?;
        let v = read_set()?;
        if floats.next().is_some() {
            return Err(corrupt("trailing payload"));
        }
        let mut params = ModelParams::default();
        for ((name, _, _), t) in header.tensors.iter().zip(values) {
            params.push(name, t);
        }
        let model = Model::from_params(header.config, params)?;
        let adam = Adam { config: header.adam, step: header.adam_step, m, v };
        Ok(Self { model, adam, seed: header.seed, meta: header.meta })
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_bytes()).map_err(|e| corrupt(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let bytes = std::fs::read(path).map_err(|e| corrupt(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}
