//! Model checkpoints.
//!
//! Layout: a magic/version line, one JSON header line (configuration,
//! tensor names and shapes, payload digest), then every parameter as
//! little-endian `f64` in header order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::features::Standardizer;
use crate::io::split::Split;
use crate::model::{ModelConfig, ModelParams, Qgcn};
use crate::tensor::Tensor;

const MAGIC: &str = "QGCN-CHECKPOINT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained model plus what is needed to evaluate it on new data.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Qgcn,
    pub run: Option<RunConfig>,
    pub standardizer: Option<Standardizer>,
    pub split: Option<Split>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    model: ModelConfig,
    run: Option<RunConfig>,
    standardizer: Option<Standardizer>,
    split: Option<Split>,
    tensors: Vec<TensorEntry>,
    sha256: String,
}

fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let params = &checkpoint.model.params;
    let mut payload = Vec::new();
    for t in params.tensors() {
        for v in t.data() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let header = Header {
        model: checkpoint.model.config.clone(),
        run: checkpoint.run.clone(),
        standardizer: checkpoint.standardizer.clone(),
        split: checkpoint.split.clone(),
        tensors: params
            .names()
            .into_iter()
            .zip(params.tensors())
            .map(|(name, t)| TensorEntry {
                name,
                shape: t.shape().to_vec(),
            })
            .collect(),
        sha256: digest(&payload),
    };
    let mut file = fs::File::create(path)?;
    writeln!(file, "{MAGIC} {CHECKPOINT_VERSION}")?;
    serde_json::to_writer(&mut file, &header)?;
    file.write_all(b"\n")?;
    file.write_all(&payload)?;
    file.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let bad = |msg: &str| Error::ingestion(path, msg);

    let first_end = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| bad("missing version line"))?;
    let first = std::str::from_utf8(&bytes[..first_end]).map_err(|_| bad("version line is not UTF-8"))?;
    let version = first
        .strip_prefix(MAGIC)
        .and_then(|rest| rest.trim().parse::<u32>().ok())
        .ok_or_else(|| bad("not a checkpoint file"))?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Incompatible(format!(
            "checkpoint format version {version}, this build reads version {CHECKPOINT_VERSION}"
        )));
    }
    let rest = &bytes[first_end + 1..];
    let header_end = rest.iter().position(|&b| b == b'\n').ok_or_else(|| bad("missing header"))?;
    let header: Header = serde_json::from_slice(&rest[..header_end]).map_err(|e| bad(&format!("header: {e}")))?;
    let payload = &rest[header_end + 1..];
    if digest(payload) != header.sha256 {
        return Err(bad("payload checksum mismatch"));
    }
    let expected: usize = header.tensors.iter().map(|t| t.shape.iter().product::<usize>()).sum();
    if payload.len() != expected * 8 {
        return Err(bad(&format!("payload holds {} bytes, header describes {}", payload.len(), expected * 8)));
    }
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunks of eight")));
    let tensors = header
        .tensors
        .iter()
        .map(|entry| {
            let len = entry.shape.iter().product();
            Tensor::new(entry.shape.clone(), values.by_ref().take(len).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let params = ModelParams::from_tensors(tensors)?;
    let model = Qgcn::new(header.model, params).map_err(|e| Error::Incompatible(e.to_string()))?;
    Ok(Checkpoint {
        model,
        run: header.run,
        standardizer: header.standardizer,
        split: header.split,
    })
}
