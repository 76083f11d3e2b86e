//! Metrics and score analyses: macro-F1, score distributions split by
//! correctness, and top-k listings.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::DatasetManifest;
use crate::dynamics::RunDynamics;
use crate::numfmt::sig9;
use crate::pruning::{rank_hard_to_easy, Direction, PruneError};
use crate::scores::{ScoreKind, ScoreTable};
use crate::trainer::{argmax, Checkpoint};

/// Histogram resolution of [`ScoreSplitSummary`].
pub const HISTOGRAM_BINS: usize = 30;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{predictions} predictions for {golds} gold labels")]
    LengthMismatch { predictions: usize, golds: usize },
    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("label vocabularies differ: model has {model:?}, data has {data:?}")]
    LabelMismatch { model: Vec<String>, data: Vec<String> },
    #[error("no prediction for example {0:?}")]
    MissingPrediction(String),
    #[error(transparent)]
    Rank(#[from] PruneError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub label: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold count.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub n: usize,
    /// Mean F1 over classes that occur in the gold labels.
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    /// `confusion[gold][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn macro_f1(predictions: &[usize], golds: &[usize], n_classes: usize) -> Result<EvalReport, EvalError> {
    if predictions.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
        });
    }
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (&p, &g) in predictions.iter().zip(golds) {
        for label in [p, g] {
            if label >= n_classes {
                return Err(EvalError::LabelOutOfRange { label, n_classes });
            }
        }
        confusion[g][p] += 1;
    }
    let per_class: Vec<ClassMetrics> = (0..n_classes)
        .map(|k| {
            let tp = confusion[k][k];
            let predicted: usize = (0..n_classes).map(|g| confusion[g][k]).sum();
            let support: usize = confusion[k].iter().sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                label: k,
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();
    let present: Vec<f64> = per_class.iter().filter(|c| c.support > 0).map(|c| c.f1).collect();
    let macro_f1 = if present.is_empty() {
        0.0
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    };
    Ok(EvalReport {
        n: golds.len(),
        macro_f1,
        per_class,
        confusion,
    })
}

/// Predicted class of every manifest example.
pub fn predict(checkpoint: &Checkpoint, manifest: &DatasetManifest) -> Result<Vec<usize>, EvalError> {
    if checkpoint.label_names != manifest.label_names() {
        return Err(EvalError::LabelMismatch {
            model: checkpoint.label_names.clone(),
            data: manifest.label_names().to_vec(),
        });
    }
    Ok(manifest
        .examples()
        .iter()
        .map(|ex| checkpoint.state.forward(&checkpoint.vocab.encode(&ex.text)).predicted())
        .collect())
}

pub fn evaluate(checkpoint: &Checkpoint, manifest: &DatasetManifest) -> Result<EvalReport, EvalError> {
    let predictions = predict(checkpoint, manifest)?;
    let golds: Vec<usize> = manifest.examples().iter().map(|e| e.label).collect();
    macro_f1(&predictions, &golds, manifest.n_classes())
}

/// Argmax of the run-averaged final-checkpoint probabilities, per example id.
pub fn final_predictions(runs: &[RunDynamics]) -> HashMap<String, usize> {
    let mut sums: HashMap<&str, Vec<f64>> = HashMap::new();
    for run in runs {
        for view in run.views() {
            let acc = sums
                .entry(view.example.example_id.as_str())
                .or_insert_with(|| vec![0.0; run.n_classes]);
            for (a, &p) in acc.iter_mut().zip(view.final_probs()) {
                *a += p as f64;
            }
        }
    }
    sums.into_iter().map(|(id, p)| (id.to_string(), argmax(&p))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitBucket {
    pub score: ScoreKind,
    pub correct: bool,
    pub label: usize,
    pub count: usize,
    /// `None` for an empty bucket.
    pub mean: Option<f64>,
    /// Population standard deviation.
    pub std: Option<f64>,
    pub histogram: [usize; HISTOGRAM_BINS],
}

/// Score distributions split by gold class and by final-checkpoint correctness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreSplitSummary {
    /// Histogram range per score, shared by all of that score's buckets.
    pub ranges: Vec<(ScoreKind, f64, f64)>,
    pub buckets: Vec<SplitBucket>,
}

fn bin_of(value: f64, lo: f64, hi: f64) -> usize {
    if hi <= lo {
        return 0;
    }
    let b = ((value - lo) / (hi - lo) * HISTOGRAM_BINS as f64).floor();
    (b.max(0.0) as usize).min(HISTOGRAM_BINS - 1)
}

/// Summarize every score the table carries, per (score, correctness, class).
pub fn score_vs_correctness(
    table: &ScoreTable,
    predictions: &HashMap<String, usize>,
) -> Result<ScoreSplitSummary, EvalError> {
    let correct: Vec<bool> = table
        .rows
        .iter()
        .map(|r| {
            predictions
                .get(&r.example_id)
                .map(|&p| p == r.label)
                .ok_or_else(|| EvalError::MissingPrediction(r.example_id.clone()))
        })
        .collect::<Result<_, _>>()?;
    let mut labels: Vec<usize> = table.rows.iter().map(|r| r.label).collect();
    labels.sort_unstable();
    labels.dedup();

    let mut summary = ScoreSplitSummary {
        ranges: Vec::new(),
        buckets: Vec::new(),
    };
    for kind in ScoreKind::ALL.into_iter().filter(|&k| table.has(k)) {
        let values: Vec<f64> = table.rows.iter().map(|r| r.get(kind).unwrap()).collect();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        summary.ranges.push((kind, lo, hi));
        for &label in &labels {
            for is_correct in [true, false] {
                let members: Vec<f64> = values
                    .iter()
                    .zip(&table.rows)
                    .zip(&correct)
                    .filter(|((_, r), &c)| r.label == label && c == is_correct)
                    .map(|((&v, _), _)| v)
                    .collect();
                let mut histogram = [0; HISTOGRAM_BINS];
                for &v in &members {
                    histogram[bin_of(v, lo, hi)] += 1;
                }
                let (mean, std) = if members.is_empty() {
                    (None, None)
                } else {
                    let n = members.len() as f64;
                    let mean = members.iter().sum::<f64>() / n;
                    let var = members.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                    (Some(mean), Some(var.sqrt()))
                };
                summary.buckets.push(SplitBucket {
                    score: kind,
                    correct: is_correct,
                    label,
                    count: members.len(),
                    mean,
                    std,
                    histogram,
                });
            }
        }
    }
    Ok(summary)
}

impl ScoreSplitSummary {
    pub const CSV_COLUMNS: &'static str =
        "score,correctness,class,bin,bin_low,bin_high,bin_count,bucket_count,bucket_mean,bucket_std";

    /// One row per (score, correctness, class, bin).
    pub fn to_csv(&self, header_line: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(line) = header_line {
            out.push_str(line);
        }
        out.push_str(Self::CSV_COLUMNS);
        out.push('\n');
        let opt = |x: Option<f64>| x.map(sig9).unwrap_or_default();
        for b in &self.buckets {
            let (_, lo, hi) = *self.ranges.iter().find(|r| r.0 == b.score).expect("range per score");
            let width = (hi - lo) / HISTOGRAM_BINS as f64;
            for (i, &count) in b.histogram.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    b.score,
                    if b.correct { "correct" } else { "misclassified" },
                    b.label,
                    i,
                    sig9(lo + width * i as f64),
                    sig9(lo + width * (i + 1) as f64),
                    count,
                    b.count,
                    opt(b.mean),
                    opt(b.std),
                ));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopEntry {
    pub rank: usize,
    pub example_id: String,
    pub label: usize,
    pub score: f64,
    /// Empty when the example is not in the joined manifest.
    pub text: String,
}

/// The `k` hardest (or easiest) examples; `k` is clamped to the table size.
pub fn top_k(
    table: &ScoreTable,
    manifest: Option<&DatasetManifest>,
    kind: ScoreKind,
    direction: Direction,
    k: usize,
) -> Result<Vec<TopEntry>, EvalError> {
    let mut ranked = rank_hard_to_easy(table, kind)?;
    if direction == Direction::Easy {
        ranked.reverse();
    }
    let rows = table.by_id();
    let texts: HashMap<&str, &str> = manifest
        .map(|m| m.examples().iter().map(|e| (e.id.as_str(), e.text.as_str())).collect())
        .unwrap_or_default();
    Ok(ranked
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, id)| {
            let row = rows[id.as_str()];
            TopEntry {
                rank: i + 1,
                label: row.label,
                score: row.get(kind).expect("ranked rows have the score"),
                text: texts.get(id.as_str()).copied().unwrap_or_default().to_string(),
                example_id: id,
            }
        })
        .collect())
}
