//! Single-file checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! | bytes            | content                                   |
//! |------------------|-------------------------------------------|
//! | `0..8`           | magic `EMOCKPT1`                          |
//! | `8..16`          | manifest length `M` as `u64`              |
//! | `16..16+M`       | UTF-8 JSON manifest                       |
//! | `16+M..`         | payload: contiguous `f32` values          |
//!
//! The manifest holds the architecture config, one entry per tensor
//! (`name`, `shape`, `dtype`, byte `offset` into the payload, element
//! `length`), Adam step counts, batch-norm initialization flags and the
//! optional training record. Every parameter stores its value plus
//! `.adam_m`/`.adam_v` moments; every batch-norm layer stores
//! `.running_mean`/`.running_var`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{build_model, MetricsLog, SampleCnnConfig, SampleCnnModel, TrainConfig};
use crate::nn::Tensor;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"EMOCKPT1";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub config: TrainConfig,
    pub metrics: MetricsLog,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: SampleCnnModel<f32>,
    pub training: Option<TrainingRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    offset: u64,
    length: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    config: SampleCnnConfig,
    tensors: Vec<TensorEntry>,
    adam_steps: BTreeMap<String, u64>,
    bn_initialized: BTreeMap<String, bool>,
    training: Option<TrainingRecord>,
}

fn corrupt(tensor: &str, message: impl Into<String>) -> Error {
    Error::Corrupt {
        tensor: tensor.to_string(),
        message: message.into(),
    }
}

/// Named tensors in storage order.
fn tensors_of(model: &SampleCnnModel<f32>) -> Vec<(String, &Tensor<f32>)> {
    let mut out = Vec::new();
    for (name, p) in model.named_params() {
        out.push((format!("{name}.adam_m"), &p.adam_m));
        out.push((format!("{name}.adam_v"), &p.adam_v));
        out.push((name, &p.value));
    }
    for (name, s) in model.named_stats() {
        out.push((format!("{name}.running_mean"), &s.mean));
        out.push((format!("{name}.running_var"), &s.var));
    }
    out
}

impl Checkpoint {
    pub fn new(model: SampleCnnModel<f32>) -> Self {
        Checkpoint {
            model,
            training: None,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut entries = Vec::new();
        let mut payload = Vec::new();
        for (name, t) in tensors_of(&self.model) {
            entries.push(TensorEntry {
                name,
                shape: t.shape().to_vec(),
                dtype: "f32".to_string(),
                offset: payload.len() as u64,
                length: t.len() as u64,
            });
            for v in t.data() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            config: self.model.config.clone(),
            tensors: entries,
            adam_steps: self
                .model
                .named_params()
                .into_iter()
                .map(|(n, p)| (n, p.step_count))
                .collect(),
            bn_initialized: self
                .model
                .named_stats()
                .into_iter()
                .map(|(n, s)| (n, s.initialized))
                .collect(),
            training: self.training.clone(),
        };
        let json = serde_json::to_vec(&manifest)?;
        let mut out = Vec::with_capacity(16 + json.len() + payload.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&payload);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(corrupt("<header>", "missing checkpoint magic"));
        }
        let mlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let json = bytes
            .get(16..16usize.saturating_add(mlen))
            .ok_or_else(|| corrupt("<manifest>", "manifest truncated"))?;
        let manifest: Manifest =
            serde_json::from_slice(json).map_err(|e| corrupt("<manifest>", e.to_string()))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(corrupt(
                "<manifest>",
                format!("unsupported format version {}", manifest.format_version),
            ));
        }
        let payload = &bytes[16 + mlen..];

        let mut model: SampleCnnModel<f32> =
            build_model(&manifest.config, 0).map_err(|e| corrupt("<config>", e.to_string()))?;
        let by_name: BTreeMap<&str, &TensorEntry> = manifest
            .tensors
            .iter()
            .map(|e| (e.name.as_str(), e))
            .collect();

        let read = |name: &str, shape: &[usize]| -> Result<Vec<f32>> {
            let entry = by_name
                .get(name)
                .ok_or_else(|| corrupt(name, "missing from manifest"))?;
            if entry.shape != shape {
                return Err(corrupt(
                    name,
                    format!(
                        "shape {:?} does not match architecture {:?}",
                        entry.shape, shape
                    ),
                ));
            }
            if entry.dtype != "f32" {
                return Err(corrupt(
                    name,
                    format!("unsupported dtype `{}`", entry.dtype),
                ));
            }
            let n: usize = shape.iter().product();
            if entry.length as usize != n {
                return Err(corrupt(
                    name,
                    format!("length {} does not match shape", entry.length),
                ));
            }
            let start = entry.offset as usize;
            let end = start.checked_add(n * 4).filter(|&e| e <= payload.len());
            let end = end.ok_or_else(|| corrupt(name, "payload truncated"))?;
            Ok(payload[start..end]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect())
        };

        let names = model.param_names();
        let mut expected_bytes = 0usize;
        for (name, p) in names.iter().zip(model.params_mut()) {
            let shape = p.shape().to_vec();
            p.value = Tensor::new(shape.clone(), read(name, &shape)?)?;
            p.adam_m = Tensor::new(shape.clone(), read(&format!("{name}.adam_m"), &shape)?)?;
            p.adam_v = Tensor::new(shape.clone(), read(&format!("{name}.adam_v"), &shape)?)?;
            p.step_count = *manifest
                .adam_steps
                .get(name)
                .ok_or_else(|| corrupt(name, "missing Adam step count"))?;
            expected_bytes += 3 * p.value.len() * 4;
        }
        let stat_names: Vec<String> = model.named_stats().into_iter().map(|(n, _)| n).collect();
        for (name, s) in stat_names.iter().zip(model.stats_mut()) {
            let shape = s.mean.shape().to_vec();
            s.mean = Tensor::new(
                shape.clone(),
                read(&format!("{name}.running_mean"), &shape)?,
            )?;
            s.var = Tensor::new(shape.clone(), read(&format!("{name}.running_var"), &shape)?)?;
            s.initialized = *manifest
                .bn_initialized
                .get(name)
                .ok_or_else(|| corrupt(name, "missing initialization flag"))?;
            expected_bytes += 2 * s.mean.len() * 4;
        }
        if manifest.tensors.len() != by_name.len() || payload.len() != expected_bytes {
            return Err(corrupt(
                "<payload>",
                format!(
                    "payload is {} bytes, manifest describes {expected_bytes}",
                    payload.len()
                ),
            ));
        }
        Ok(Checkpoint {
            model,
            training: manifest.training,
        })
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, checkpoint.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}
