//! Checkpoint files.
//!
//! ```text
//! "DDC1" | u32 LE header length | JSON header | f32 LE tensors
//! ```
//!
//! Tensors follow the header in this order: the five parameter tensors
//! (embedding, hidden_weight, hidden_bias, output_weight, output_bias), then
//! the AdamW first moments and second moments in the same order. Shapes,
//! epoch, seed, config and vocabulary live in the header. Values are rounded
//! to f32 on write.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::model::{Dims, ModelState, Params, TENSOR_NAMES};
use super::{TrainError, TrainerConfig, Vocab};
use crate::provenance::config_hash;

const MAGIC: &[u8; 4] = b"DDC1";
const FORMAT_VERSION: u32 = 1;

/// Model snapshot taken after the last batch of `epoch`.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub epoch: usize,
    /// Mean of the per-batch mean cross-entropy over the epoch.
    pub mean_loss: f64,
    pub config: TrainerConfig,
    pub vocab: Arc<Vocab>,
    pub label_names: Vec<String>,
    pub state: ModelState,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    tool: String,
    epoch: usize,
    seed: u64,
    config_hash: String,
    config: TrainerConfig,
    mean_loss: f64,
    step: u64,
    dims: Dims,
    shapes: Vec<(String, Vec<usize>)>,
    label_names: Vec<String>,
    vocab: Vec<String>,
}

fn shapes(dims: Dims) -> Vec<(String, Vec<usize>)> {
    let s = [
        vec![dims.vocab, dims.embed],
        vec![dims.hidden, dims.embed],
        vec![dims.hidden],
        vec![dims.classes, dims.hidden],
        vec![dims.classes],
    ];
    TENSOR_NAMES
        .iter()
        .zip(s)
        .map(|(n, s)| (n.to_string(), s))
        .collect()
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            format_version: FORMAT_VERSION,
            tool: crate::TOOL_VERSION.to_string(),
            epoch: self.epoch,
            seed: self.config.seed,
            config_hash: config_hash(&self.config),
            config: self.config.clone(),
            mean_loss: self.mean_loss,
            step: self.state.step,
            dims: self.state.dims,
            shapes: shapes(self.state.dims),
            label_names: self.label_names.clone(),
            vocab: self.vocab.tokens().to_vec(),
        };
        let json = serde_json::to_vec(&header).expect("checkpoint header serializes");
        let mut out = Vec::with_capacity(8 + json.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        let s = &self.state;
        for params in [&s.params, &s.first_moment, &s.second_moment] {
            for t in params.tensors() {
                for &x in t {
                    out.extend_from_slice(&(x as f32).to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TrainError> {
        let fmt = |m: String| TrainError::Format(m);
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(fmt("missing DDC1 magic".into()));
        }
        let header_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let body = bytes
            .get(8..8 + header_len)
            .ok_or_else(|| fmt("truncated header".into()))?;
        let header: Header =
            serde_json::from_slice(body).map_err(|e| fmt(format!("bad header: {e}")))?;
        if header.format_version != FORMAT_VERSION {
            return Err(fmt(format!(
                "unsupported checkpoint version {}",
                header.format_version
            )));
        }
        if header.vocab.len() != header.dims.vocab {
            return Err(fmt("vocabulary length disagrees with dims".into()));
        }
        let mut floats = bytes[8 + header_len..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
        let expected: usize = shapes(header.dims)
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum::<usize>()
            * 3;
        if bytes.len() - 8 - header_len != expected * 4 {
            return Err(fmt(format!(
                "expected {} tensor bytes, found {}",
                expected * 4,
                bytes.len() - 8 - header_len
            )));
        }
        let mut read_params = || {
            let mut p = Params::zeros(header.dims);
            for t in p.tensors_mut() {
                t.iter_mut().for_each(|x| *x = floats.next().unwrap());
            }
            p
        };
        let params = read_params();
        let first_moment = read_params();
        let second_moment = read_params();
        Ok(Checkpoint {
            epoch: header.epoch,
            mean_loss: header.mean_loss,
            vocab: Arc::new(Vocab::from_tokens(header.vocab)),
            label_names: header.label_names,
            state: ModelState {
                dims: header.dims,
                activation: header.config.activation,
                params,
                first_moment,
                second_moment,
                step: header.step,
            },
            config: header.config,
        })
    }
}

pub fn write_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<(), TrainError> {
    fs::write(path, checkpoint.to_bytes()).map_err(|source| TrainError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, TrainError> {
    let bytes = fs::read(path).map_err(|source| TrainError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Checkpoint::from_bytes(&bytes)
}
