//! Training-dynamics logs: everything the influence scores need, per run.
//!
//! A [`RunDynamics`] holds, for every example and every checkpoint, the
//! predicted probability vector and (optionally) the gradient of the gold-label
//! pre-softmax activation with respect to the pooled input embedding, plus the
//! null model's gold-label probability from its final checkpoint. The on-disk
//! `.ddlog` format is described in [`format`].

pub mod format;
mod validate;

pub use format::{read_log, write_log};
pub use validate::{validate_external, ValidationReport};

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::DatasetManifest;
use crate::trainer::{build_vocab, train_null, Checkpoint, TrainError, NULL_ID};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a .ddlog file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported .ddlog version {found} (this build reads version {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("malformed .ddlog header: {0}")]
    Header(String),
    #[error("truncated .ddlog: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("checksum mismatch in block {block}")]
    Checksum { block: usize },
    #[error(".ddlog has {0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("no checkpoints to record")]
    NoCheckpoints,
    #[error("checkpoint vocabulary does not match the manifest ({0})")]
    VocabularyMismatch(String),
    #[error(transparent)]
    Train(#[from] TrainError),
}

/// Per-example record across all checkpoints of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleDynamics {
    pub example_id: String,
    pub label: usize,
    /// `n_checkpoints x n_classes`, checkpoint-major.
    pub probs: Vec<f32>,
    /// `n_checkpoints x grad_dim`, checkpoint-major.
    pub grads: Option<Vec<f32>>,
    /// Null-model probability of the gold label, final checkpoint.
    pub null_prob: Option<f32>,
}

impl ExampleDynamics {
    pub fn n_checkpoints(&self, n_classes: usize) -> usize {
        self.probs.len() / n_classes.max(1)
    }

    pub fn probs_at(&self, checkpoint: usize, n_classes: usize) -> &[f32] {
        &self.probs[checkpoint * n_classes..(checkpoint + 1) * n_classes]
    }

    pub fn grad_at(&self, checkpoint: usize, grad_dim: usize) -> Option<&[f32]> {
        self.grads
            .as_ref()
            .map(|g| &g[checkpoint * grad_dim..(checkpoint + 1) * grad_dim])
    }
}

/// One training run's dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct RunDynamics {
    pub run_id: String,
    pub seed: u64,
    pub n_checkpoints: usize,
    pub n_classes: usize,
    /// Present iff every example carries gradients.
    pub grad_dim: Option<usize>,
    pub has_null: bool,
    pub examples: Vec<ExampleDynamics>,
    pub provenance: Option<serde_json::Value>,
}

impl RunDynamics {
    /// Borrowed view of one example that knows the run's dimensions.
    pub fn view(&self, index: usize) -> DynamicsView<'_> {
        DynamicsView {
            example: &self.examples[index],
            n_checkpoints: self.n_checkpoints,
            n_classes: self.n_classes,
            grad_dim: self.grad_dim,
        }
    }

    pub fn views(&self) -> impl Iterator<Item = DynamicsView<'_>> {
        (0..self.examples.len()).map(|i| self.view(i))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DynamicsView<'a> {
    pub example: &'a ExampleDynamics,
    pub n_checkpoints: usize,
    pub n_classes: usize,
    pub grad_dim: Option<usize>,
}

impl<'a> DynamicsView<'a> {
    pub fn probs_at(&self, checkpoint: usize) -> &'a [f32] {
        self.example.probs_at(checkpoint, self.n_classes)
    }

    pub fn final_probs(&self) -> &'a [f32] {
        self.probs_at(self.n_checkpoints - 1)
    }

    pub fn grad_at(&self, checkpoint: usize) -> Option<&'a [f32]> {
        self.grad_dim
            .and_then(|d| self.example.grad_at(checkpoint, d))
    }
}

/// Evaluate every checkpoint on every manifest example.
///
/// With `with_null`, a null model is trained on the same manifest with the
/// checkpoints' config and seed, and its final-checkpoint gold probability is stored.
pub fn record_dynamics(
    checkpoints: &[Checkpoint],
    manifest: &DatasetManifest,
    with_null: bool,
) -> Result<RunDynamics, DynamicsError> {
    let first = checkpoints.first().ok_or(DynamicsError::NoCheckpoints)?;
    let config = &first.config;
    let expected_vocab = build_vocab(manifest, config.vocab_cap);
    for cp in checkpoints {
        if *cp.vocab != expected_vocab {
            return Err(DynamicsError::VocabularyMismatch(format!(
                "checkpoint for epoch {} has {} tokens, manifest yields {}",
                cp.epoch,
                cp.vocab.len(),
                expected_vocab.len()
            )));
        }
        if cp.label_names != manifest.label_names() {
            return Err(DynamicsError::VocabularyMismatch(
                "label vocabularies differ".to_string(),
            ));
        }
    }

    let null_probs = if with_null {
        let null_cps = train_null(manifest, config)?;
        let last = null_cps.last().expect("epochs >= 1");
        Some(last.state.forward(&[NULL_ID]).probs)
    } else {
        None
    };

    let k = manifest.n_classes();
    let d = first.state.dims.embed;
    let examples = manifest
        .examples()
        .par_iter()
        .map(|ex| {
            let tokens = expected_vocab.encode(&ex.text);
            let mut probs = Vec::with_capacity(checkpoints.len() * k);
            let mut grads = Vec::with_capacity(checkpoints.len() * d);
            for cp in checkpoints {
                let pass = cp.state.forward(&tokens);
                grads.extend(
                    cp.state
                        .input_gradient_at(&pass, ex.label)
                        .into_iter()
                        .map(|g| g as f32),
                );
                probs.extend(pass.probs.iter().map(|&p| p as f32));
            }
            ExampleDynamics {
                example_id: ex.id.clone(),
                label: ex.label,
                probs,
                grads: Some(grads),
                null_prob: null_probs.as_ref().map(|p| p[ex.label] as f32),
            }
        })
        .collect();

    Ok(RunDynamics {
        run_id: format!("seed-{}", config.seed),
        seed: config.seed,
        n_checkpoints: checkpoints.len(),
        n_classes: k,
        grad_dim: Some(d),
        has_null: with_null,
        examples,
        provenance: None,
    })
}
