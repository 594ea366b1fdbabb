//! Model files: `SAM1`, a little-endian `u32` header length, a JSON header,
//! then the parameters as little-endian `f64`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::kernels::{hex, kernel_checksum, KERNEL_COUNT, KERNEL_SIZE};
use super::{AnalyzerModel, TrainMetrics};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SAM1";
pub const FORMAT_VERSION: u32 = 1;
pub const ARCHITECTURE: &str = "srm8-conv3x3-relu-moments-linear";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub format_version: u32,
    pub architecture: String,
    pub kernels: usize,
    pub kernel_size: usize,
    pub kernel_checksum: String,
    pub channels: usize,
    pub truncation: f64,
    pub param_count: usize,
    pub seed: u64,
    pub metrics: TrainMetrics,
    pub checksum: String,
}

/// SHA-256 over the little-endian parameter bytes.
pub fn payload_checksum(params: &[f64]) -> String {
    let mut h = Sha256::new();
    for p in params {
        h.update(p.to_le_bytes());
    }
    hex(&h.finalize())
}

pub fn header(model: &AnalyzerModel) -> ModelHeader {
    ModelHeader {
        format_version: FORMAT_VERSION,
        architecture: ARCHITECTURE.into(),
        kernels: KERNEL_COUNT,
        kernel_size: KERNEL_SIZE,
        kernel_checksum: kernel_checksum(),
        channels: model.channels(),
        truncation: model.truncation(),
        param_count: model.params().len(),
        seed: model.seed,
        metrics: model.metrics.clone(),
        checksum: model.checksum(),
    }
}

pub fn to_bytes(model: &AnalyzerModel) -> Result<Vec<u8>> {
    let head = serde_json::to_vec(&header(model))?;
    let mut out = Vec::with_capacity(8 + head.len() + 8 * model.params().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(head.len() as u32).to_le_bytes());
    out.extend_from_slice(&head);
    for p in model.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<AnalyzerModel> {
    let (head, payload) = split(bytes)?;
    if head.format_version != FORMAT_VERSION {
        return Err(Error::Model(format!(
            "unsupported model format version {}",
            head.format_version
        )));
    }
    if head.architecture != ARCHITECTURE
        || head.kernels != KERNEL_COUNT
        || head.kernel_size != KERNEL_SIZE
        || head.kernel_checksum != kernel_checksum()
    {
        return Err(Error::Model(format!(
            "architecture mismatch: file has {} with {} kernels ({})",
            head.architecture, head.kernels, head.kernel_checksum
        )));
    }
    if head.param_count != AnalyzerModel::param_count(head.channels) || payload.len() != 8 * head.param_count {
        return Err(Error::Model(format!(
            "parameter count mismatch: header says {}, payload holds {} bytes",
            head.param_count,
            payload.len()
        )));
    }
    let params: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let sum = payload_checksum(&params);
    if sum != head.checksum {
        return Err(Error::Model(format!(
            "checksum mismatch: header {} but payload hashes to {sum}",
            head.checksum
        )));
    }
    let mut model = AnalyzerModel::from_params(head.channels, head.truncation, params)?;
    model.seed = head.seed;
    model.metrics = head.metrics;
    Ok(model)
}

/// Parses only the header.
pub fn read_header(bytes: &[u8]) -> Result<ModelHeader> {
    split(bytes).map(|(h, _)| h)
}

fn split(bytes: &[u8]) -> Result<(ModelHeader, &[u8])> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::Model("not a model file (bad magic)".into()));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let end = 8usize
        .checked_add(n)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Model("truncated model header".into()))?;
    let head: ModelHeader = serde_json::from_slice(&bytes[8..end])
        .map_err(|e| Error::Model(format!("malformed model header: {e}")))?;
    Ok((head, &bytes[end..]))
}

pub fn save(model: &AnalyzerModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(model)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<AnalyzerModel> {
    from_bytes(&std::fs::read(path)?)
}
