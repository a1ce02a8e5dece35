//! Versioned binary checkpoint.
//!
//! ```text
//! magic    8 bytes   "TYPOEMB\0"
//! version  u32 LE
//! hlen     u64 LE    length of the JSON header in bytes
//! header   hlen bytes, UTF-8 JSON (config, languages, vocabulary, step,
//!          epochs, loss history, and the ordered block list)
//! blocks   for each header block: rows * cols f64 LE, row-major
//! ```
//!
//! Blocks hold every model parameter by name, then the Adam moments as
//! `adam.m.<name>` and `adam.v.<name>`. Loading and saving again reproduces
//! the file byte for byte.

use super::{Denoiser, EpochRecord, ModelConfig, Side};
use crate::corpus::{Vocabulary, WordVectors, RESERVED};
use crate::nn::OptimizerState;
use crate::numeric::Matrix;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"TYPOEMB\0";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A model with its optimizer state, vocabulary and training history.
#[derive(Clone, Debug)]
pub struct DenoiserCheckpoint {
    pub model: Denoiser,
    pub optimizer: OptimizerState,
    /// Language codes in index order.
    pub languages: Vec<String>,
    /// Content words in id order (reserved ids excluded).
    pub vocabulary: Vec<String>,
    pub epochs_completed: usize,
    pub history: Vec<EpochRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockInfo {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: ModelConfig,
    languages: Vec<String>,
    vocabulary: Vec<String>,
    step: u64,
    epochs_completed: usize,
    history: Vec<EpochRecord>,
    blocks: Vec<BlockInfo>,
}

impl DenoiserCheckpoint {
    pub fn new(model: Denoiser, languages: Vec<String>, vocabulary: Vec<String>) -> Result<Self> {
        let config = &model.config;
        if languages.len() != config.languages {
            return Err(Error::Data(format!(
                "{} language codes for a model with {} languages",
                languages.len(),
                config.languages
            )));
        }
        if vocabulary.len() + RESERVED.len() != config.vocab_size {
            return Err(Error::Data(format!(
                "{} content words for a vocabulary of {}",
                vocabulary.len(),
                config.vocab_size
            )));
        }
        let optimizer = OptimizerState::new(config.optimizer.clone(), &model.params());
        Ok(DenoiserCheckpoint {
            model,
            optimizer,
            languages,
            vocabulary,
            epochs_completed: 0,
            history: Vec::new(),
        })
    }

    pub fn step(&self) -> u64 {
        self.optimizer.step
    }

    pub fn vocab(&self) -> Vocabulary {
        Vocabulary::from_words(&self.vocabulary)
    }

    /// The requested side's language table, rows in language index order.
    pub fn language_embeddings(&self, side: Side) -> WordVectors {
        WordVectors {
            words: self.languages.clone(),
            vectors: self.model.language_table(side).clone(),
        }
    }

    fn blocks(&self) -> Vec<(String, &Matrix)> {
        let params = self.model.params();
        let mut out: Vec<(String, &Matrix)> = params.iter().map(|p| (p.name.clone(), &p.value)).collect();
        for (p, m) in params.iter().zip(&self.optimizer.first_moment) {
            out.push((format!("adam.m.{}", p.name), m));
        }
        for (p, v) in params.iter().zip(&self.optimizer.second_moment) {
            out.push((format!("adam.v.{}", p.name), v));
        }
        out
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let blocks = self.blocks();
        let header = Header {
            config: self.model.config.clone(),
            languages: self.languages.clone(),
            vocabulary: self.vocabulary.clone(),
            step: self.optimizer.step,
            epochs_completed: self.epochs_completed,
            history: self.history.clone(),
            blocks: blocks
                .iter()
                .map(|(name, m)| BlockInfo {
                    name: name.clone(),
                    rows: m.rows(),
                    cols: m.cols(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header)?;
        let payload: usize = blocks.iter().map(|(_, m)| m.data().len() * 8).sum();
        let mut out = Vec::with_capacity(20 + json.len() + payload);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, m) in blocks {
            for v in m.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: String| Error::parse("checkpoint", msg);
        if bytes.len() < 20 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(bad("not a checkpoint file (bad magic)".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let body = &bytes[20..];
        if body.len() < hlen {
            return Err(bad("truncated header".into()));
        }
        let header: Header = serde_json::from_slice(&body[..hlen])?;
        let mut data = &body[hlen..];
        let mut blocks: HashMap<String, Matrix> = HashMap::new();
        for info in &header.blocks {
            let n = info.rows * info.cols;
            if data.len() < n * 8 {
                return Err(bad(format!("truncated block `{}`", info.name)));
            }
            let values = data[..n * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            data = &data[n * 8..];
            blocks.insert(info.name.clone(), Matrix::from_vec(info.rows, info.cols, values)?);
        }
        if !data.is_empty() {
            return Err(bad(format!("{} trailing bytes", data.len())));
        }
        let mut take = |name: &str, shape: (usize, usize)| -> Result<Matrix> {
            let m = blocks
                .remove(name)
                .ok_or_else(|| bad(format!("missing block `{name}`")))?;
            if m.shape() != shape {
                return Err(bad(format!(
                    "block `{name}` has shape {:?}, expected {shape:?}",
                    m.shape()
                )));
            }
            Ok(m)
        };
        let mut model = Denoiser::new(header.config)?;
        for p in model.params_mut() {
            p.value = take(&p.name, p.value.shape())?;
        }
        let mut ckpt = DenoiserCheckpoint::new(model, header.languages, header.vocabulary)?;
        let names: Vec<(String, (usize, usize))> = ckpt
            .model
            .params()
            .iter()
            .map(|p| (p.name.clone(), p.value.shape()))
            .collect();
        for (i, (name, shape)) in names.iter().enumerate() {
            ckpt.optimizer.first_moment[i] = take(&format!("adam.m.{name}"), *shape)?;
            ckpt.optimizer.second_moment[i] = take(&format!("adam.v.{name}"), *shape)?;
        }
        if let Some(extra) = blocks.keys().min() {
            return Err(bad(format!("unknown block `{extra}`")));
        }
        ckpt.optimizer.step = header.step;
        ckpt.epochs_completed = header.epochs_completed;
        ckpt.history = header.history;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        DenoiserCheckpoint::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::tiny_config;
    use super::*;
    use crate::corpus::TaggedSentence;

    fn trained() -> DenoiserCheckpoint {
        let s: Vec<TaggedSentence> = (0..6)
            .map(|i| TaggedSentence::new(&[4 + i % 6, 5, 4 + (i * 3) % 6], i % 3, 10).unwrap())
            .collect();
        let langs = vec!["aa".to_string(), "bb".into(), "cc".into()];
        let words = (4..10).map(|i| format!("w{i}")).collect();
        super::super::train(tiny_config(), langs, words, &s, 2).unwrap()
    }

    #[test]
    fn reload_then_save_is_byte_identical() {
        let ckpt = trained();
        let bytes = ckpt.to_bytes().unwrap();
        let back = DenoiserCheckpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert_eq!(back.step(), ckpt.step());
        assert_eq!(back.history, ckpt.history);
        for (a, b) in back.model.params().iter().zip(ckpt.model.params()) {
            assert_eq!(a.value, b.value);
            assert_eq!(a.trainable, b.trainable);
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = trained().to_bytes().unwrap();
        assert!(DenoiserCheckpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(DenoiserCheckpoint::from_bytes(b"nonsense").is_err());
        let mut wrong_version = bytes.clone();
        wrong_version[8] = 9;
        assert!(DenoiserCheckpoint::from_bytes(&wrong_version).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(DenoiserCheckpoint::from_bytes(&extra).is_err());
    }

    #[test]
    fn embedding_export_round_trips() {
        let ckpt = trained();
        let table = ckpt.language_embeddings(Side::Decoder);
        assert_eq!(table.vectors.shape(), (3, 2));
        assert_eq!(table.words, ckpt.languages);
        let back = WordVectors::parse(&table.to_text(), "mem").unwrap();
        for (a, b) in back.vectors.data().iter().zip(table.vectors.data()) {
            assert!((a - b).abs() <= 1e-12 * b.abs());
        }
        assert_ne!(
            ckpt.language_embeddings(Side::Encoder).vectors,
            ckpt.language_embeddings(Side::Decoder).vectors
        );
    }

    #[test]
    fn save_and_load_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let ckpt = trained();
        ckpt.save(&path).unwrap();
        assert_eq!(
            DenoiserCheckpoint::load(&path).unwrap().to_bytes().unwrap(),
            ckpt.to_bytes().unwrap()
        );
    }
}
