//! Per-example influence scores computed from training-dynamics logs.
//!
//! - PVI: `-log2 g[null][y] + log2 g'[x][y]`, in bits, from the null model and
//!   the final checkpoint. Negative means hard.
//! - EL2N: `|| p - onehot(y) ||_2`, under a configurable checkpoint policy.
//! - VoG: per embedding component, the population standard deviation of the
//!   gold-label input gradient across checkpoints, averaged over components;
//!   then z-scored within each gold-label class.
//!
//! Scores from several runs are averaged per example before VoG normalization.

mod table;

pub use table::{read_score_table, write_score_table, ScoreMeta, ScoreRow, ScoreTable};

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{DynamicsView, RunDynamics};

/// Lower bound applied to probabilities before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("example {id:?}: PVI needs null-model probabilities (train with the null model enabled)")]
    MissingNull { id: String },
    #[error("example {id:?}: VoG needs input-embedding gradients")]
    MissingGradients { id: String },
    #[error("EL2N policy asks for checkpoint {requested} but the log has {available}")]
    MissingCheckpoint { requested: usize, available: usize },
    #[error("no runs to score")]
    NoRuns,
    #[error("runs cover different example ids: {0}")]
    IdMismatch(String),
    #[error("example {id:?} has different gold labels across runs")]
    LabelMismatch { id: String },
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: std::path::PathBuf,
        line: u64,
        message: String,
    },
}

/// Scores that can rank examples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Pvi,
    El2n,
    /// Class-normalized VoG.
    Vog,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 3] = [ScoreKind::Pvi, ScoreKind::El2n, ScoreKind::Vog];

    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::Pvi => "pvi",
            ScoreKind::El2n => "el2n",
            ScoreKind::Vog => "vog",
        }
    }

    /// PVI is hard when low; EL2N and VoG are hard when high.
    pub fn low_is_hard(self) -> bool {
        matches!(self, ScoreKind::Pvi)
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pvi" => Ok(ScoreKind::Pvi),
            "el2n" => Ok(ScoreKind::El2n),
            "vog" | "vog_norm" => Ok(ScoreKind::Vog),
            other => Err(format!("unknown score {other:?} (expected pvi, el2n or vog)")),
        }
    }
}

/// Which checkpoints enter EL2N.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum El2nPolicy {
    #[default]
    Final,
    /// Mean of the per-checkpoint scores.
    MeanOverCheckpoints,
    AtEpoch(usize),
}

impl fmt::Display for El2nPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            El2nPolicy::Final => f.write_str("final"),
            El2nPolicy::MeanOverCheckpoints => f.write_str("mean"),
            El2nPolicy::AtEpoch(c) => write!(f, "epoch:{c}"),
        }
    }
}

impl FromStr for El2nPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "final" => Ok(El2nPolicy::Final),
            "mean" | "mean_over_checkpoints" => Ok(El2nPolicy::MeanOverCheckpoints),
            other => other
                .strip_prefix("epoch:")
                .and_then(|c| c.parse().ok())
                .map(El2nPolicy::AtEpoch)
                .ok_or_else(|| format!("unknown EL2N policy {other:?} (expected final, mean or epoch:N)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub el2n_policy: El2nPolicy,
}

/// PVI in bits and whether either probability hit [`PROB_FLOOR`].
pub fn pvi_with_clamp(view: &DynamicsView<'_>) -> Result<(f64, bool), ScoreError> {
    let ex = view.example;
    let null = ex.null_prob.ok_or_else(|| ScoreError::MissingNull {
        id: ex.example_id.clone(),
    })? as f64;
    let conditioned = view.final_probs()[ex.label] as f64;
    let clamped = null < PROB_FLOOR || conditioned < PROB_FLOOR;
    let bits = -null.max(PROB_FLOOR).log2() + conditioned.max(PROB_FLOOR).log2();
    Ok((bits, clamped))
}

pub fn pvi(view: &DynamicsView<'_>) -> Result<f64, ScoreError> {
    pvi_with_clamp(view).map(|(bits, _)| bits)
}

fn el2n_at(probs: &[f32], gold: usize) -> f64 {
    probs
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let diff = p as f64 - if k == gold { 1.0 } else { 0.0 };
            diff * diff
        })
        .sum::<f64>()
        .sqrt()
}

pub fn el2n(view: &DynamicsView<'_>, policy: El2nPolicy) -> Result<f64, ScoreError> {
    let gold = view.example.label;
    match policy {
        El2nPolicy::Final => Ok(el2n_at(view.final_probs(), gold)),
        El2nPolicy::AtEpoch(c) if c < view.n_checkpoints => Ok(el2n_at(view.probs_at(c), gold)),
        El2nPolicy::AtEpoch(c) => Err(ScoreError::MissingCheckpoint {
            requested: c,
            available: view.n_checkpoints,
        }),
        El2nPolicy::MeanOverCheckpoints => Ok((0..view.n_checkpoints)
            .map(|c| el2n_at(view.probs_at(c), gold))
            .sum::<f64>()
            / view.n_checkpoints as f64),
    }
}

/// Unnormalized VoG. A single checkpoint gives 0.
pub fn vog_raw(view: &DynamicsView<'_>) -> Result<f64, ScoreError> {
    let missing = || ScoreError::MissingGradients {
        id: view.example.example_id.clone(),
    };
    let d = view.grad_dim.ok_or_else(missing)?;
    let n_c = view.n_checkpoints;
    let grads: Vec<&[f32]> = (0..n_c)
        .map(|c| view.grad_at(c).ok_or_else(missing))
        .collect::<Result<_, _>>()?;
    let total: f64 = (0..d)
        .map(|e| {
            let mean = grads.iter().map(|g| g[e] as f64).sum::<f64>() / n_c as f64;
            let var = grads
                .iter()
                .map(|g| {
                    let dev = g[e] as f64 - mean;
                    dev * dev
                })
                .sum::<f64>()
                / n_c as f64;
            var.sqrt()
        })
        .sum();
    Ok(total / d as f64)
}

/// Z-score `values` within each label class (population std).
///
/// Classes whose values are all equal (including singletons) map to 0; their
/// labels are returned in the second element.
pub fn class_normalize(values: &[f64], labels: &[usize]) -> (Vec<f64>, Vec<usize>) {
    let mut by_class: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, &label) in labels.iter().enumerate() {
        by_class.entry(label).or_default().push(i);
    }
    let mut out = vec![0.0; values.len()];
    let mut degenerate = Vec::new();
    for (label, members) in by_class {
        let first = values[members[0]];
        if members.iter().all(|&i| values[i] == first) {
            degenerate.push(label);
            continue;
        }
        let n = members.len() as f64;
        let mean = members.iter().map(|&i| values[i]).sum::<f64>() / n;
        let var = members
            .iter()
            .map(|&i| (values[i] - mean).powi(2))
            .sum::<f64>()
            / n;
        let std = var.sqrt();
        for &i in &members {
            out[i] = (values[i] - mean) / std;
        }
    }
    (out, degenerate)
}

/// Recompute `vog_norm` from `vog_raw` for every row.
pub fn vog_normalize(table: &ScoreTable) -> ScoreTable {
    let mut out = table.clone();
    out.normalize_vog();
    out
}

struct PerRun {
    pvi: Option<(f64, bool)>,
    el2n: f64,
    vog_raw: Option<f64>,
}

fn score_view(view: &DynamicsView<'_>, config: &ScoreConfig) -> Result<PerRun, ScoreError> {
    Ok(PerRun {
        pvi: if view.example.null_prob.is_some() {
            Some(pvi_with_clamp(view)?)
        } else {
            None
        },
        el2n: el2n(view, config.el2n_policy)?,
        vog_raw: if view.grad_dim.is_some() {
            Some(vog_raw(view)?)
        } else {
            None
        },
    })
}

/// Average per-run scores over runs, then class-normalize VoG.
///
/// PVI is present only if every run has null probabilities, VoG only if every
/// run has gradients. Rows follow the first run's example order.
pub fn score_runs(runs: &[RunDynamics], config: &ScoreConfig) -> Result<ScoreTable, ScoreError> {
    let first = runs.first().ok_or(ScoreError::NoRuns)?;
    let index_maps: Vec<HashMap<&str, usize>> = runs
        .iter()
        .map(|r| {
            r.examples
                .iter()
                .enumerate()
                .map(|(i, e)| (e.example_id.as_str(), i))
                .collect()
        })
        .collect();
    for (r, run) in runs.iter().enumerate().skip(1) {
        if run.examples.len() != first.examples.len()
            || first
                .examples
                .iter()
                .any(|e| !index_maps[r].contains_key(e.example_id.as_str()))
        {
            return Err(ScoreError::IdMismatch(format!(
                "run {:?} ({} examples) vs run {:?} ({} examples)",
                first.run_id,
                first.examples.len(),
                run.run_id,
                run.examples.len()
            )));
        }
    }
    let all_null = runs.iter().all(|r| r.has_null);
    let all_grads = runs.iter().all(|r| r.grad_dim.is_some());
    let n_runs = runs.len() as f64;

    let rows: Vec<(ScoreRow, usize)> = first
        .examples
        .par_iter()
        .map(|ex| {
            let mut pvi_sum = 0.0;
            let mut el2n_sum = 0.0;
            let mut vog_sum = 0.0;
            let mut clamps = 0;
            for (run, index) in runs.iter().zip(&index_maps) {
                let view = run.view(index[ex.example_id.as_str()]);
                if view.example.label != ex.label {
                    return Err(ScoreError::LabelMismatch {
                        id: ex.example_id.clone(),
                    });
                }
                let s = score_view(&view, config)?;
                if let Some((bits, clamped)) = s.pvi {
                    pvi_sum += bits;
                    clamps += usize::from(clamped);
                }
                el2n_sum += s.el2n;
                vog_sum += s.vog_raw.unwrap_or(0.0);
            }
            Ok((
                ScoreRow {
                    example_id: ex.example_id.clone(),
                    label: ex.label,
                    pvi: all_null.then_some(pvi_sum / n_runs),
                    el2n: el2n_sum / n_runs,
                    vog_raw: all_grads.then_some(vog_sum / n_runs),
                    vog_norm: None,
                },
                clamps,
            ))
        })
        .collect::<Result<_, ScoreError>>()?;

    let clamped_probabilities = rows.iter().map(|(_, c)| c).sum();
    if clamped_probabilities > 0 {
        log::warn!("{clamped_probabilities} probabilities clamped to {PROB_FLOOR} before log2");
    }
    let mut table = ScoreTable {
        rows: rows.into_iter().map(|(row, _)| row).collect(),
        meta: ScoreMeta {
            runs: runs.len(),
            el2n_policy: config.el2n_policy,
            clamped_probabilities,
            degenerate_vog_classes: Vec::new(),
        },
    };
    table.normalize_vog();
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ExampleDynamics;

    fn run_with(examples: Vec<ExampleDynamics>, n_checkpoints: usize, grad_dim: Option<usize>) -> RunDynamics {
        RunDynamics {
            run_id: "r".into(),
            seed: 0,
            n_checkpoints,
            n_classes: 2,
            grad_dim,
            has_null: examples.iter().all(|e| e.null_prob.is_some()),
            examples,
            provenance: None,
        }
    }

    fn ex(id: &str, label: usize, probs: Vec<f32>, null: Option<f32>) -> ExampleDynamics {
        ExampleDynamics {
            example_id: id.into(),
            label,
            probs,
            grads: None,
            null_prob: null,
        }
    }

    fn pvi_of(null: f32, conditioned: f32) -> f64 {
        let run = run_with(vec![ex("a", 0, vec![conditioned, 1.0 - conditioned], Some(null))], 1, None);
        pvi(&run.view(0)).unwrap()
    }

    #[test]
    fn pvi_hand_values() {
        assert_eq!(pvi_of(0.5, 0.5), 0.0);
        assert_eq!(pvi_of(0.5, 1.0), 1.0);
        assert_eq!(pvi_of(0.5, 0.25), -1.0);
    }

    #[test]
    fn pvi_clamps_zero_probability() {
        let run = run_with(vec![ex("a", 1, vec![1.0, 0.0], Some(0.5))], 1, None);
        let (bits, clamped) = pvi_with_clamp(&run.view(0)).unwrap();
        assert!(clamped);
        assert!((bits - (1.0 + PROB_FLOOR.log2())).abs() < 1e-12);
        assert!(bits > -41.0);
    }

    #[test]
    fn pvi_without_null_fails() {
        let run = run_with(vec![ex("a", 0, vec![0.5, 0.5], None)], 1, None);
        assert!(matches!(pvi(&run.view(0)), Err(ScoreError::MissingNull { .. })));
    }

    #[test]
    fn el2n_hand_values() {
        let run = run_with(
            vec![
                ex("a", 0, vec![1.0, 0.0], None),
                ex("b", 0, vec![0.5, 0.5], None),
                ex("c", 0, vec![0.0, 1.0], None),
            ],
            1,
            None,
        );
        let v: Vec<f64> = run.views().map(|v| el2n(&v, El2nPolicy::Final).unwrap()).collect();
        assert_eq!(v[0], 0.0);
        assert!((v[1] - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((v[2] - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn el2n_policies() {
        let run = run_with(vec![ex("a", 0, vec![1.0, 0.0, 0.5, 0.5, 0.0, 1.0], None)], 3, None);
        let v = run.view(0);
        assert!((el2n(&v, El2nPolicy::Final).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(el2n(&v, El2nPolicy::AtEpoch(0)).unwrap(), 0.0);
        let mean = (0.0 + 0.5f64.sqrt() + 2f64.sqrt()) / 3.0;
        assert!((el2n(&v, El2nPolicy::MeanOverCheckpoints).unwrap() - mean).abs() < 1e-12);
        assert!(matches!(
            el2n(&v, El2nPolicy::AtEpoch(3)),
            Err(ScoreError::MissingCheckpoint { requested: 3, available: 3 })
        ));
    }

    fn vog_of(grads: Vec<f32>, n_c: usize, d: usize) -> f64 {
        let mut e = ex("a", 0, [0.5f32, 0.5].repeat(n_c), None);
        e.grads = Some(grads);
        let run = run_with(vec![e], n_c, Some(d));
        vog_raw(&run.view(0)).unwrap()
    }

    #[test]
    fn vog_hand_values() {
        assert_eq!(vog_of(vec![0.3, -1.0, 0.3, -1.0, 0.3, -1.0], 3, 2), 0.0);
        assert_eq!(vog_of(vec![1.0, -1.0], 2, 1), 1.0);
        // component 0 constant, component 1 alternates +1 / -1
        assert_eq!(vog_of(vec![4.0, 1.0, 4.0, -1.0], 2, 2), 0.5);
        assert_eq!(vog_of(vec![2.0, 7.0], 1, 2), 0.0);
    }

    #[test]
    fn vog_without_gradients_fails() {
        let run = run_with(vec![ex("a", 0, vec![0.5, 0.5], None)], 1, None);
        assert!(matches!(vog_raw(&run.view(0)), Err(ScoreError::MissingGradients { .. })));
    }

    #[test]
    fn class_normalize_hand_values() {
        let (z, degenerate) = class_normalize(&[1.0, 2.0, 3.0, 5.0, 5.0, 5.0], &[0, 0, 0, 1, 1, 1]);
        let expected = 1.5f64.sqrt(); // 1 / sqrt(2/3)
        assert!((z[0] + expected).abs() < 1e-12);
        assert_eq!(z[1], 0.0);
        assert!((z[2] - expected).abs() < 1e-12);
        assert!((z[2] - 1.22474).abs() < 1e-5);
        assert_eq!(&z[3..], &[0.0, 0.0, 0.0]);
        assert_eq!(degenerate, vec![1]);
    }

    #[test]
    fn score_runs_averages_el2n() {
        let runs: Vec<RunDynamics> = [0.3f32, 0.5, 0.7]
            .iter()
            .map(|&target| {
                // binary, gold 0: el2n = sqrt(2) * (1 - p0)
                let p0 = 1.0 - target / 2f32.sqrt();
                run_with(vec![ex("a", 0, vec![p0, 1.0 - p0], None)], 1, None)
            })
            .collect();
        let table = score_runs(&runs, &ScoreConfig::default()).unwrap();
        assert!((table.rows[0].el2n - 0.5).abs() < 1e-6);
        assert_eq!(table.meta.runs, 3);
        assert_eq!(table.rows[0].pvi, None);
    }

    #[test]
    fn score_runs_rejects_mismatched_ids() {
        let a = run_with(vec![ex("a", 0, vec![0.5, 0.5], None)], 1, None);
        let b = run_with(vec![ex("b", 0, vec![0.5, 0.5], None)], 1, None);
        assert!(matches!(score_runs(&[a, b], &ScoreConfig::default()), Err(ScoreError::IdMismatch(_))));
        assert!(matches!(score_runs(&[], &ScoreConfig::default()), Err(ScoreError::NoRuns)));
    }

    #[test]
    fn parse_names() {
        assert_eq!("vog".parse::<ScoreKind>().unwrap(), ScoreKind::Vog);
        assert_eq!("epoch:3".parse::<El2nPolicy>().unwrap(), El2nPolicy::AtEpoch(3));
        assert_eq!(El2nPolicy::AtEpoch(3).to_string(), "epoch:3");
        assert!("epoch:x".parse::<El2nPolicy>().is_err());
    }
}
