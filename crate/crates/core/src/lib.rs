//! Training-difficulty scores and score-based data pruning for text classification.
//!
//! The crate is organised along the pipeline it implements:
//!
//! - [`corpus`]: labeled text manifests (CSV + label sidecar), stratified splits,
//!   combination, and synthetic imbalanced fixtures.
//! - [`trainer`]: a small deterministic classifier (mean-pooled embeddings, one
//!   tanh hidden layer, softmax) trained with AdamW, emitting one checkpoint per epoch.
//! - [`dynamics`]: the per-run training-dynamics log (`.ddlog`) that every score is
//!   computed from, including logs produced by external trainers.
//! - [`scores`]: PVI, EL2N and class-normalized VoG with multi-run averaging.
//! - [`pruning`]: hard/easy/random/stratified pruning, class-ratio curves and the
//!   prune → retrain → evaluate sweep.
//! - [`evaluation`]: macro-F1, per-class metrics, score distributions by correctness
//!   and top-k listings.

pub mod corpus;
pub mod dynamics;
pub mod error;
pub mod evaluation;
pub mod numfmt;
pub mod provenance;
pub mod pruning;
pub mod scores;
pub mod trainer;

pub use error::{Error, Result};

/// Version string stamped into every file this crate writes.
pub const TOOL_VERSION: &str = concat!("datadiet ", env!("CARGO_PKG_VERSION"));
