//! Labeled text manifests.
//!
//! A manifest on disk is a CSV file with header `id,text,label,source`
//! (RFC-4180 quoting, UTF-8, LF line endings) and a JSON sidecar next to it
//! holding the label vocabulary: `data.csv` pairs with `data.labels.json`,
//! which looks like `{"labels": ["non-sexist", "sexist"]}` and may carry an
//! optional `split` tag and a `provenance` object.

mod fixture;
mod manifest;
mod split;

pub use fixture::{synthesize_fixture, FixtureSpec, HardnessMode};
pub use manifest::{load_manifest, save_manifest, sidecar_path};
pub use split::{combine_manifests, split_manifest};
pub(crate) use split::apportion;

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}: invalid label sidecar: {message}")]
    Sidecar { path: PathBuf, message: String },
    #[error("duplicate example id {id:?} (line {line})")]
    DuplicateId { id: String, line: u64 },
    #[error("label index {label} out of range for {n_labels} label classes (line {line})")]
    LabelOutOfRange {
        label: usize,
        n_labels: usize,
        line: u64,
    },
    #[error("manifest is empty")]
    EmptyManifest,
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
    #[error("label vocabularies differ: {left:?} vs {right:?}")]
    VocabularyMismatch {
        left: Vec<String>,
        right: Vec<String>,
    },
    #[error("invalid fixture spec: {0}")]
    InvalidFixture(String),
}

/// Which side of a train/test split a manifest holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub text: String,
    /// Index into [`DatasetManifest::label_names`].
    pub label: usize,
    pub source: Option<String>,
}

impl Example {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: usize) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            label,
            source: None,
        }
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = Some(source.into());
        self
    }
}

/// An ordered, validated set of labeled examples.
///
/// Ids are unique and every label indexes `label_names`; [`DatasetManifest::new`]
/// enforces both and the fields are read-only afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    examples: Vec<Example>,
    label_names: Vec<String>,
    split: Option<Split>,
    provenance: Option<serde_json::Value>,
}

impl DatasetManifest {
    pub fn new(examples: Vec<Example>, label_names: Vec<String>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(examples.len());
        for (i, ex) in examples.iter().enumerate() {
            let line = i as u64 + 2;
            if !seen.insert(ex.id.as_str()) {
                return Err(CorpusError::DuplicateId {
                    id: ex.id.clone(),
                    line,
                });
            }
            if ex.label >= label_names.len() {
                return Err(CorpusError::LabelOutOfRange {
                    label: ex.label,
                    n_labels: label_names.len(),
                    line,
                });
            }
        }
        Ok(Self {
            examples,
            label_names,
            split: None,
            provenance: None,
        })
    }

    pub fn with_split(mut self, split: Option<Split>) -> Self {
        self.split = split;
        self
    }

    pub fn with_provenance(mut self, provenance: Option<serde_json::Value>) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn n_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn split(&self) -> Option<Split> {
        self.split
    }

    pub fn provenance(&self) -> Option<&serde_json::Value> {
        self.provenance.as_ref()
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.examples.iter().map(|e| e.id.as_str())
    }

    pub fn class_count(&self, label: usize) -> usize {
        self.examples.iter().filter(|e| e.label == label).count()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.label_names.len()];
        for ex in &self.examples {
            counts[ex.label] += 1;
        }
        counts
    }

    /// Subset with the given ids, in manifest order. Unknown ids are ignored.
    pub fn retain_ids(&self, ids: &HashSet<&str>) -> DatasetManifest {
        DatasetManifest {
            examples: self
                .examples
                .iter()
                .filter(|e| ids.contains(e.id.as_str()))
                .cloned()
                .collect(),
            label_names: self.label_names.clone(),
            split: self.split,
            provenance: None,
        }
    }
}
