//! Checkpoint files: one JSON header line followed by little-endian `f32`
//! tensors in declaration order.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EncoderError, ParamSet, ShapeArch, ShapeEncoder, TensorSpec, TextArch, TextEncoder};
use crate::dataset::Vocabulary;

pub const CHECKPOINT_FORMAT: &str = "rodfind-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained model: both encoders plus the vocabulary queries must use.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub text: TextEncoder<f32>,
    pub shape: ShapeEncoder<f32>,
    pub vocabulary: Vocabulary,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Byte offset from the start of the blob.
    offset: usize,
    /// Byte length.
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    seed: u64,
    text_arch: TextArch,
    shape_arch: ShapeArch,
    vocabulary: Vocabulary,
    tensors: Vec<TensorEntry>,
}

fn bad(message: impl Into<String>) -> EncoderError {
    EncoderError::Checkpoint(message.into())
}

/// Hex SHA-256 of `bytes`.
pub fn fingerprint(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut tensors = Vec::new();
        let mut blob = Vec::new();
        for set in [&self.text.params, &self.shape.params] {
            for (i, spec) in set.specs().iter().enumerate() {
                let offset = blob.len();
                for v in set.tensor(i) {
                    blob.extend_from_slice(&v.to_le_bytes());
                }
                tensors.push(TensorEntry { name: spec.name.clone(), shape: spec.shape.clone(), offset, len: blob.len() - offset });
            }
        }
        let header = Header {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            seed: self.seed,
            text_arch: self.text.arch.clone(),
            shape_arch: self.shape.arch.clone(),
            vocabulary: self.vocabulary.clone(),
            tensors,
        };
        let mut out = serde_json::to_vec(&header).expect("header serializes");
        out.push(b'\n');
        out.extend_from_slice(&blob);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EncoderError> {
        let split = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| bad("missing header line"))?;
        let header: Header = serde_json::from_slice(&bytes[..split]).map_err(|e| bad(format!("header: {e}")))?;
        if header.format != CHECKPOINT_FORMAT || header.version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported format {} v{}", header.format, header.version)));
        }
        let blob = &bytes[split + 1..];
        let mut entries = header.tensors.iter();
        let mut read_set = |specs: Vec<TensorSpec>| -> Result<ParamSet<f32>, EncoderError> {
            let mut data = Vec::new();
            for spec in &specs {
                let e = entries.next().ok_or_else(|| bad(format!("tensor `{}` missing", spec.name)))?;
                if e.name != spec.name || e.shape != spec.shape || e.len != spec.numel() * 4 {
                    return Err(bad(format!("tensor `{}` does not match the architecture", e.name)));
                }
                let raw = blob.get(e.offset..e.offset + e.len).ok_or_else(|| bad(format!("tensor `{}` truncated", e.name)))?;
                data.extend(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))));
            }
            ParamSet::from_data(specs, data).ok_or_else(|| bad("parameter count mismatch"))
        };
        let text_params = read_set(header.text_arch.tensor_specs())?;
        let shape_params = read_set(header.shape_arch.tensor_specs()?)?;
        if entries.next().is_some() {
            return Err(bad("unexpected extra tensors"));
        }
        if header.vocabulary.len() != header.text_arch.vocab_size {
            return Err(bad("vocabulary size disagrees with the text encoder"));
        }
        Ok(Self {
            text: TextEncoder::new(header.text_arch, text_params)?,
            shape: ShapeEncoder::new(header.shape_arch, shape_params)?,
            vocabulary: header.vocabulary,
            seed: header.seed,
        })
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(&self.to_bytes())
    }

    /// Writes the checkpoint and returns its fingerprint.
    pub fn save(&self, path: &Path) -> Result<String, EncoderError> {
        let bytes = self.to_bytes();
        std::fs::write(path, &bytes).map_err(|source| EncoderError::Io { path: path.to_path_buf(), source })?;
        Ok(fingerprint(&bytes))
    }

    /// Reads a checkpoint and returns it with its fingerprint.
    pub fn load(path: &Path) -> Result<(Self, String), EncoderError> {
        let bytes = std::fs::read(path).map_err(|source| EncoderError::Io { path: path.to_path_buf(), source })?;
        Ok((Self::from_bytes(&bytes)?, fingerprint(&bytes)))
    }
}
