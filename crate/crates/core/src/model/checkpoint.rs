//! Binary checkpoints: `"MTLM"`, u32 version, u32 header length, a JSON header, then every
//! parameter tensor (trainable, then running statistics) as little-endian f32.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelAnnotations, ModelConfig, ModelError};
use crate::tensor::{Real, Tensor};

const MAGIC: &[u8; 4] = b"MTLM";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub config: ModelConfig,
    #[serde(flatten)]
    pub annotations: ModelAnnotations,
    /// Name and shape of every stored tensor, in file order.
    pub tensors: Vec<(String, Vec<usize>)>,
}

fn corrupt(msg: impl Into<String>) -> ModelError {
    ModelError::CorruptCheckpoint(msg.into())
}

fn tensor_table<T: Real>(model: &Model<T>) -> Vec<(String, &Tensor<T>)> {
    let mut all = model.trainable();
    all.extend(model.state());
    all
}

pub fn checkpoint_to_bytes<T: Real>(model: &Model<T>) -> Vec<u8> {
    let table = tensor_table(model);
    let header = CheckpointHeader {
        config: model.config().clone(),
        annotations: model.annotations.clone(),
        tensors: table
            .iter()
            .map(|(n, t)| (n.clone(), t.shape().to_vec()))
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("checkpoint header serializes");
    let floats: usize = table.iter().map(|(_, t)| t.len()).sum();
    let mut out = Vec::with_capacity(12 + json.len() + 4 * floats);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, t) in table {
        for &v in t.data() {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    out
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32, ModelError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .ok_or_else(|| corrupt("truncated preamble"))
}

pub fn checkpoint_from_bytes<T: Real>(bytes: &[u8]) -> Result<Model<T>, ModelError> {
    if bytes.get(..4) != Some(MAGIC.as_slice()) {
        return Err(corrupt("bad magic"));
    }
    let version = read_u32(bytes, 4)?;
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let header_len = read_u32(bytes, 8)? as usize;
    let header_bytes = bytes
        .get(12..12 + header_len)
        .ok_or_else(|| corrupt("truncated header"))?;
    let header: CheckpointHeader =
        serde_json::from_slice(header_bytes).map_err(|e| corrupt(format!("header: {e}")))?;
    let mut model = Model::<T>::zeros(header.config.clone())
        .map_err(|e| corrupt(format!("header config: {e}")))?;
    model.annotations = header.annotations;

    let expected: Vec<(String, Vec<usize>)> = tensor_table(&model)
        .iter()
        .map(|(n, t)| (n.clone(), t.shape().to_vec()))
        .collect();
    if expected != header.tensors {
        return Err(corrupt(
            "tensor table does not match the configured architecture",
        ));
    }
    let mut payload = &bytes[12 + header_len..];
    for t in model.trainable_mut() {
        payload = fill(t, payload)?;
    }
    for t in model.state_mut() {
        payload = fill(t, payload)?;
    }
    if !payload.is_empty() {
        return Err(corrupt(format!("{} trailing bytes", payload.len())));
    }
    Ok(model)
}

fn fill<'a, T: Real>(tensor: &mut Tensor<T>, payload: &'a [u8]) -> Result<&'a [u8], ModelError> {
    let need = 4 * tensor.len();
    if payload.len() < need {
        return Err(corrupt("truncated parameter data"));
    }
    let (head, rest) = payload.split_at(need);
    for (dst, src) in tensor.data_mut().iter_mut().zip(head.chunks_exact(4)) {
        let v = f32::from_le_bytes(src.try_into().unwrap());
        if !v.is_finite() {
            return Err(corrupt("non-finite parameter value"));
        }
        *dst = T::from_f64(v as f64);
    }
    Ok(rest)
}

pub fn save_checkpoint<T: Real>(model: &Model<T>, path: &Path) -> Result<(), ModelError> {
    std::fs::write(path, checkpoint_to_bytes(model)).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_checkpoint<T: Real>(path: &Path) -> Result<Model<T>, ModelError> {
    let bytes = std::fs::read(path).map_err(|source| ModelError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    checkpoint_from_bytes(&bytes)
}

/// Load a checkpoint and require that its mood vocabulary hash matches `mood_vocab_hash`.
pub fn load_checkpoint_checked<T: Real>(
    path: &Path,
    mood_vocab_hash: &str,
) -> Result<Model<T>, ModelError> {
    let model = load_checkpoint::<T>(path)?;
    if model.annotations.mood_vocab_hash != mood_vocab_hash {
        return Err(corrupt(format!(
            "mood vocabulary hash {} does not match the expected {}",
            model.annotations.mood_vocab_hash, mood_vocab_hash
        )));
    }
    Ok(model)
}
