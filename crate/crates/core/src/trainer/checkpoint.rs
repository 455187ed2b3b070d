//! Checkpoint format (little-endian): magic `VGCKPT01`, `u64` JSON-header
//! length, JSON header (config, vocabulary, metadata, model shape and a
//! tensor manifest of name/shape/offset), then every tensor as row-major
//! `f32` values in manifest order.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::TrainConfig;
use crate::dataset::{tokenize, ByteReader, Vocabulary};
use crate::error::{read_file, write_file, Error, Result};
use crate::model::{encoder_forward, CellKind, Dims, EncoderParams, TENSOR_NAMES};

pub const CKPT_MAGIC: &[u8; 8] = b"VGCKPT01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainMeta {
    pub epochs_run: usize,
    pub epoch_losses: Vec<f64>,
    /// SHA-256 of the serialized training set.
    pub data_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub config: TrainConfig,
    pub vocab: Vocabulary,
    pub params: EncoderParams<f32>,
    pub meta: TrainMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset from the start of the tensor section.
    pub offset: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelShape {
    dims: Dims,
    cell: CellKind,
    unk_seed: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: TrainConfig,
    vocabulary: Vocabulary,
    metadata: TrainMeta,
    model: ModelShape,
    tensors: Vec<TensorEntry>,
}

impl ModelCheckpoint {
    /// Command embedding of already-tokenized text.
    pub fn embed_tokens(&self, tokens: &[String]) -> Result<Vec<f32>> {
        let ids = self.vocab.encode(tokens);
        Ok(encoder_forward(&self.params, &ids)?.0)
    }

    pub fn embed(&self, command: &str) -> Result<Vec<f32>> {
        self.embed_tokens(&tokenize(command)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut offset = 0;
        let tensors = TENSOR_NAMES
            .iter()
            .zip(self.params.shapes())
            .map(|(name, shape)| {
                let entry = TensorEntry {
                    name: name.to_string(),
                    offset,
                    shape,
                };
                offset += entry.shape.iter().product::<usize>() * 4;
                entry
            })
            .collect();
        let header = Header {
            config: self.config.clone(),
            vocabulary: self.vocab.clone(),
            metadata: self.meta.clone(),
            model: ModelShape {
                dims: self.params.dims,
                cell: self.params.cell,
                unk_seed: self.params.unk_seed,
            },
            tensors,
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(16 + header.len() + offset);
        out.extend_from_slice(CKPT_MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for t in self.params.tensors() {
            for x in t {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "checkpoint header");
        if bytes.len() < 8 || &bytes[..8] != CKPT_MAGIC {
            return Err(Error::BadMagic {
                what: "checkpoint",
                expected: "VGCKPT01",
            });
        }
        r.take(8)?;
        let header_len = r.u64()? as usize;
        let header: Header = serde_json::from_slice(r.take(header_len)?)?;
        let dims = header.model.dims;
        if header.vocabulary.len() != dims.vocab {
            return Err(Error::VocabMismatch {
                vocab: header.vocabulary.len(),
                rows: dims.vocab,
            });
        }
        if header.tensors.len() != TENSOR_NAMES.len() {
            return Err(Error::data(format!(
                "tensor manifest lists {} tensors, expected {}",
                header.tensors.len(),
                TENSOR_NAMES.len()
            )));
        }
        let mut values: [Vec<f32>; 6] = Default::default();
        let mut expected_offset = 0;
        for (i, entry) in header.tensors.iter().enumerate() {
            if entry.name != TENSOR_NAMES[i] || entry.offset != expected_offset {
                return Err(Error::data(format!(
                    "tensor manifest entry {i} is {:?} at offset {}, expected {:?} at {expected_offset}",
                    entry.name, entry.offset, TENSOR_NAMES[i]
                )));
            }
            let n: usize = entry.shape.iter().product();
            let available = r.remaining();
            if n * 4 > available {
                return Err(Error::Truncated {
                    section: format!("tensor {}", entry.name),
                    expected: n * 4,
                    found: available,
                });
            }
            values[i] = r.f32s(n)?;
            expected_offset += n * 4;
        }
        if r.remaining() != 0 {
            return Err(Error::data(format!("{} trailing bytes after tensors", r.remaining())));
        }
        if header.tensors[0].shape.first() != Some(&dims.vocab) {
            return Err(Error::VocabMismatch {
                vocab: header.vocabulary.len(),
                rows: header.tensors[0].shape.first().copied().unwrap_or(0),
            });
        }
        let params = EncoderParams::from_tensors(dims, header.model.cell, header.model.unk_seed, values)?;
        for (entry, shape) in header.tensors.iter().zip(params.shapes()) {
            if entry.shape != shape {
                return Err(Error::data(format!(
                    "tensor {} has shape {:?}, expected {:?}",
                    entry.name, entry.shape, shape
                )));
            }
        }
        Ok(ModelCheckpoint {
            config: header.config,
            vocab: header.vocabulary,
            params,
            meta: header.metadata,
        })
    }

    /// SHA-256 of the serialized checkpoint, hex encoded.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}
