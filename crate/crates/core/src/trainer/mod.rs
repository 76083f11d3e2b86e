//! Deterministic reference classifier standing in for a fine-tuned transformer.
//!
//! [`train`] runs mini-batch AdamW over mean cross-entropy and emits one
//! [`Checkpoint`] per epoch. [`train_null`] trains the same architecture with
//! every input replaced by the `NULL` token, so it can only learn label priors.

mod checkpoint;
mod model;
mod optim;
mod vocab;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use model::{argmax, softmax, Activation, Dims, ForwardPass, ModelState, Params};
pub use optim::{AdamW, Schedule};
pub use vocab::{tokenize, TokenId, Vocab, MAX_TOKENS, NULL_ID, NULL_TOKEN, OOV_ID, OOV_TOKEN};

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::DatasetManifest;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid trainer config: {0}")]
    InvalidConfig(String),
    #[error("cannot train on an empty manifest")]
    EmptyManifest,
    #[error("non-finite loss in epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("non-finite parameter after the update in epoch {epoch}, batch {batch}")]
    NonFiniteParameter { epoch: usize, batch: usize },
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed checkpoint: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: Schedule,
    pub seed: u64,
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub vocab_cap: usize,
    /// Replace every input with the `NULL` token.
    pub null_model: bool,
    pub activation: Activation,
    pub optimizer: AdamW,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-3,
            epochs: 10,
            batch_size: 32,
            schedule: Schedule::LinearDecay,
            seed: 0,
            embedding_dim: 32,
            hidden_dim: 64,
            vocab_cap: 8192,
            null_model: false,
            activation: Activation::Tanh,
            optimizer: AdamW::default(),
        }
    }
}

impl TrainerConfig {
    /// Recipe for retraining on pruned data: half the epochs at half the learning rate.
    pub fn retrain(&self) -> Self {
        Self {
            learning_rate: self.learning_rate / 2.0,
            epochs: (self.epochs / 2).max(1),
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: &str| Err(TrainError::InvalidConfig(msg.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive and finite");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.embedding_dim == 0 || self.hidden_dim == 0 {
            return bad("embedding_dim and hidden_dim must be at least 1");
        }
        if self.vocab_cap < 2 {
            return bad("vocab_cap must leave room for the NULL and OOV tokens");
        }
        Ok(())
    }
}

/// Token ids for every example, honouring `null_model`.
pub fn encode_manifest(vocab: &Vocab, manifest: &DatasetManifest, null_model: bool) -> Vec<Vec<TokenId>> {
    manifest
        .examples()
        .iter()
        .map(|e| {
            if null_model {
                vec![NULL_ID]
            } else {
                vocab.encode(&e.text)
            }
        })
        .collect()
}

pub fn build_vocab(manifest: &DatasetManifest, cap: usize) -> Vocab {
    Vocab::build(manifest.examples().iter().map(|e| e.text.as_str()), cap)
}

/// Shuffled example order for one epoch; depends only on `(seed, epoch)`.
fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

pub fn train(manifest: &DatasetManifest, config: &TrainerConfig) -> Result<Vec<Checkpoint>, TrainError> {
    config.validate()?;
    if manifest.is_empty() {
        return Err(TrainError::EmptyManifest);
    }
    let vocab = Arc::new(build_vocab(manifest, config.vocab_cap));
    let inputs = encode_manifest(&vocab, manifest, config.null_model);
    let golds: Vec<usize> = manifest.examples().iter().map(|e| e.label).collect();

    let dims = Dims {
        vocab: vocab.len(),
        embed: config.embedding_dim,
        hidden: config.hidden_dim,
        classes: manifest.n_classes(),
    };
    let mut state = ModelState::init(dims, config.activation, config.seed);
    let mut grads = Params::zeros(dims);
    let n = inputs.len();
    let batches_per_epoch = n.div_ceil(config.batch_size);
    let total_steps = batches_per_epoch * config.epochs;
    let label_names = manifest.label_names().to_vec();

    let mut checkpoints = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let order = epoch_order(n, config.seed, epoch);
        let mut loss_sum = 0.0;
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            grads.fill_zero();
            let mut batch_loss = 0.0;
            for &i in chunk {
                batch_loss += state.accumulate_gradients(&inputs[i], golds[i], &mut grads);
            }
            let scale = 1.0 / chunk.len() as f64;
            batch_loss *= scale;
            if !batch_loss.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, batch });
            }
            for t in grads.tensors_mut() {
                t.iter_mut().for_each(|g| *g *= scale);
            }
            let step = epoch * batches_per_epoch + batch;
            let lr = config.schedule.rate(config.learning_rate, step, total_steps);
            config.optimizer.step(&mut state, &grads, lr);
            if !state.params.all_finite() {
                return Err(TrainError::NonFiniteParameter { epoch, batch });
            }
            loss_sum += batch_loss;
        }
        checkpoints.push(Checkpoint {
            epoch,
            mean_loss: loss_sum / batches_per_epoch as f64,
            config: config.clone(),
            vocab: Arc::clone(&vocab),
            label_names: label_names.clone(),
            state: state.clone(),
        });
    }
    Ok(checkpoints)
}

/// Train on `(NULL, label)` pairs only.
pub fn train_null(manifest: &DatasetManifest, config: &TrainerConfig) -> Result<Vec<Checkpoint>, TrainError> {
    let config = TrainerConfig {
        null_model: true,
        ..config.clone()
    };
    train(manifest, &config)
}
