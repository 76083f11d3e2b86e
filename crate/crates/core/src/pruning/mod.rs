//! Score-based and random pruning of a training manifest, plus class-ratio diagnostics.
//!
//! Rankings run from hardest to easiest: ascending PVI, descending EL2N and
//! VoG, ties broken by ascending example id. Hard pruning removes a prefix of
//! that ranking and easy pruning the matching suffix. The removal count is
//! always `floor(rate * n)`.
//!
//! Stratified pruning (an extension, not part of the original protocol) splits
//! the removal count into per-class quotas by largest remainder, so the class
//! ratio stays where it was up to rounding.

mod sweep;

pub use sweep::{
    default_specs, random_prune_seed, standard_specs, sweep, CurvePoint, SweepConfig, SweepFailure, SweepReport, SweepRow,
};

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::apportion;
use crate::corpus::DatasetManifest;
use crate::scores::{ScoreKind, ScoreRow, ScoreTable};

/// The pruning rates of the standard grid.
pub const RATE_GRID: [f64; 10] = [0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.50, 0.60];

pub fn rate_grid() -> Vec<f64> {
    RATE_GRID.to_vec()
}

#[derive(Debug, Error)]
pub enum PruneError {
    #[error("pruning rate must be in [0, 1), got {0}")]
    InvalidRate(f64),
    #[error("no {score} score for example {id:?}")]
    MissingScore { score: ScoreKind, id: String },
    #[error("score table label {table} for example {id:?} disagrees with manifest label {manifest}")]
    LabelMismatch { id: String, table: usize, manifest: usize },
    #[error("manifest is empty")]
    EmptyManifest,
    #[error("invalid sweep configuration: {0}")]
    InvalidSweep(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Hard,
    Easy,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Hard => "hard",
            Direction::Easy => "easy",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hard" => Ok(Direction::Hard),
            "easy" => Ok(Direction::Easy),
            other => Err(format!("unknown direction {other:?} (expected hard or easy)")),
        }
    }
}

/// Which examples a prune removes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Ranked { score: ScoreKind, direction: Direction },
    Random,
}

impl Selection {
    pub fn score_name(&self) -> &'static str {
        match self {
            Selection::Ranked { score, .. } => score.as_str(),
            Selection::Random => "random",
        }
    }

    pub fn direction_name(&self) -> &'static str {
        match self {
            Selection::Ranked { direction, .. } => direction.as_str(),
            Selection::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneSpec {
    pub selection: Selection,
    /// Fraction removed, in `[0, 1)`.
    pub rate: f64,
    /// Sampling seed; only random selection uses it.
    pub seed: u64,
    pub stratified: bool,
}

impl PruneSpec {
    pub fn ranked(score: ScoreKind, direction: Direction, rate: f64) -> Self {
        Self {
            selection: Selection::Ranked { score, direction },
            rate,
            seed: 0,
            stratified: false,
        }
    }

    pub fn random(rate: f64, seed: u64) -> Self {
        Self {
            selection: Selection::Random,
            rate,
            seed,
            stratified: false,
        }
    }

    pub fn stratified(self) -> Self {
        Self {
            stratified: true,
            ..self
        }
    }

    pub fn validate(&self) -> Result<(), PruneError> {
        if (0.0..1.0).contains(&self.rate) {
            Ok(())
        } else {
            Err(PruneError::InvalidRate(self.rate))
        }
    }

    fn key(&self) -> (Selection, u64, u64, bool) {
        let seed = match self.selection {
            Selection::Random => self.seed,
            Selection::Ranked { .. } => 0,
        };
        (self.selection, self.rate.to_bits(), seed, self.stratified)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PruneResult {
    /// Kept ids, in manifest order.
    pub retained: Vec<String>,
    /// Removed ids, in removal order (hardest first for hard pruning).
    pub removed: Vec<String>,
    pub retained_per_class: Vec<usize>,
    /// Minority-to-majority count ratio of the full manifest.
    pub ratio_before: f64,
    pub ratio_after: f64,
}

impl PruneResult {
    /// The retained subset of `manifest`.
    pub fn apply(&self, manifest: &DatasetManifest) -> DatasetManifest {
        let keep: HashSet<&str> = self.retained.iter().map(String::as_str).collect();
        manifest.retain_ids(&keep)
    }
}

/// Removal count for `rate` on `n` examples.
pub fn removal_count(rate: f64, n: usize) -> usize {
    ((rate * n as f64) + 1e-9).floor() as usize
}

/// Minority and majority classes of `counts`: the smallest and largest class
/// (last smallest, first largest on ties).
pub fn minority_majority(counts: &[usize]) -> (usize, usize) {
    let mut minority = 0;
    let mut majority = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c <= counts[minority] {
            minority = k;
        }
        if c > counts[majority] {
            majority = k;
        }
    }
    (minority, majority)
}

/// `counts[minority] / counts[majority]`; 0 when the minority is empty,
/// infinity when only the majority is.
pub fn class_ratio(counts: &[usize], minority: usize, majority: usize) -> f64 {
    match (counts[minority], counts[majority]) {
        (0, _) => 0.0,
        (_, 0) => f64::INFINITY,
        (a, b) => a as f64 / b as f64,
    }
}

fn order(kind: ScoreKind, a: (f64, &str), b: (f64, &str)) -> std::cmp::Ordering {
    let by_value = if kind.low_is_hard() {
        a.0.total_cmp(&b.0)
    } else {
        b.0.total_cmp(&a.0)
    };
    by_value.then_with(|| a.1.cmp(b.1))
}

/// Ids of `table` from hardest to easiest under `kind`.
pub fn rank_hard_to_easy(table: &ScoreTable, kind: ScoreKind) -> Result<Vec<String>, PruneError> {
    let mut scored: Vec<(f64, &str)> = table
        .rows
        .iter()
        .map(|r| {
            r.get(kind)
                .map(|s| (s, r.example_id.as_str()))
                .ok_or_else(|| PruneError::MissingScore {
                    score: kind,
                    id: r.example_id.clone(),
                })
        })
        .collect::<Result<_, _>>()?;
    scored.sort_by(|a, b| order(kind, *a, *b));
    Ok(scored.into_iter().map(|(_, id)| id.to_string()).collect())
}

/// Manifest indices from hardest to easiest.
fn rank_manifest(
    manifest: &DatasetManifest,
    rows: &HashMap<&str, &ScoreRow>,
    kind: ScoreKind,
) -> Result<Vec<usize>, PruneError> {
    let mut scored = Vec::with_capacity(manifest.len());
    for (i, ex) in manifest.examples().iter().enumerate() {
        let missing = || PruneError::MissingScore {
            score: kind,
            id: ex.id.clone(),
        };
        let row = rows.get(ex.id.as_str()).ok_or_else(missing)?;
        if row.label != ex.label {
            return Err(PruneError::LabelMismatch {
                id: ex.id.clone(),
                table: row.label,
                manifest: ex.label,
            });
        }
        scored.push((row.get(kind).ok_or_else(missing)?, ex.id.as_str(), i));
    }
    scored.sort_by(|a, b| order(kind, (a.0, a.1), (b.0, b.1)));
    Ok(scored.into_iter().map(|(_, _, i)| i).collect())
}

/// Pick `count` entries of `ranked` from the hard end or the easy end, or at random.
fn take(ranked: &[usize], count: usize, selection: Selection, rng: &mut ChaCha8Rng) -> Vec<usize> {
    match selection {
        Selection::Ranked {
            direction: Direction::Hard,
            ..
        } => ranked[..count].to_vec(),
        Selection::Ranked {
            direction: Direction::Easy,
            ..
        } => ranked[ranked.len() - count..].iter().rev().copied().collect(),
        Selection::Random => sample(rng, ranked.len(), count)
            .into_iter()
            .map(|j| ranked[j])
            .collect(),
    }
}

/// Remove `floor(rate * n)` examples of `manifest` according to `spec`.
///
/// `table` must cover every manifest id unless the selection is random.
pub fn prune(manifest: &DatasetManifest, table: &ScoreTable, spec: &PruneSpec) -> Result<PruneResult, PruneError> {
    spec.validate()?;
    if manifest.is_empty() {
        return Err(PruneError::EmptyManifest);
    }
    let ranked = match spec.selection {
        Selection::Ranked { score, .. } => rank_manifest(manifest, &table.by_id(), score)?,
        Selection::Random => (0..manifest.len()).collect(),
    };
    prune_ranked(manifest, &ranked, spec)
}

fn prune_ranked(manifest: &DatasetManifest, ranked: &[usize], spec: &PruneSpec) -> Result<PruneResult, PruneError> {
    let n = manifest.len();
    let n_remove = removal_count(spec.rate, n);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let removed_idx: Vec<usize> = if spec.stratified {
        let counts = manifest.class_counts();
        let quotas = apportion(&counts, spec.rate, n_remove);
        let mut out = Vec::with_capacity(n_remove);
        for (label, &quota) in quotas.iter().enumerate() {
            let class_ranked: Vec<usize> = ranked
                .iter()
                .copied()
                .filter(|&i| manifest.examples()[i].label == label)
                .collect();
            out.extend(take(&class_ranked, quota, spec.selection, &mut rng));
        }
        out
    } else {
        take(ranked, n_remove, spec.selection, &mut rng)
    };

    let mut is_removed = vec![false; n];
    for &i in &removed_idx {
        is_removed[i] = true;
    }
    let examples = manifest.examples();
    let before = manifest.class_counts();
    let mut after = vec![0; before.len()];
    let mut retained = Vec::with_capacity(n - removed_idx.len());
    for (i, ex) in examples.iter().enumerate() {
        if !is_removed[i] {
            after[ex.label] += 1;
            retained.push(ex.id.clone());
        }
    }
    let (minority, majority) = minority_majority(&before);
    Ok(PruneResult {
        retained,
        removed: removed_idx.iter().map(|&i| examples[i].id.clone()).collect(),
        ratio_before: class_ratio(&before, minority, majority),
        ratio_after: class_ratio(&after, minority, majority),
        retained_per_class: after,
    })
}

/// Retained minority-to-majority ratio at each rate, for `base` with its rate replaced.
pub fn class_ratio_curve(
    manifest: &DatasetManifest,
    table: &ScoreTable,
    base: &PruneSpec,
    rates: &[f64],
) -> Result<Vec<(f64, f64)>, PruneError> {
    if manifest.is_empty() {
        return Err(PruneError::EmptyManifest);
    }
    let ranked = match base.selection {
        Selection::Ranked { score, .. } => rank_manifest(manifest, &table.by_id(), score)?,
        Selection::Random => (0..manifest.len()).collect(),
    };
    rates
        .iter()
        .map(|&rate| {
            let spec = PruneSpec { rate, ..*base };
            spec.validate()?;
            prune_ranked(manifest, &ranked, &spec).map(|r| (rate, r.ratio_after))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Example;
    use crate::scores::ScoreMeta;

    fn table(values: &[(&str, usize, f64)]) -> ScoreTable {
        ScoreTable {
            rows: values
                .iter()
                .map(|&(id, label, v)| ScoreRow {
                    example_id: id.into(),
                    label,
                    pvi: Some(v),
                    el2n: v,
                    vog_raw: Some(v),
                    vog_norm: Some(v),
                })
                .collect(),
            meta: ScoreMeta::default(),
        }
    }

    fn manifest_for(t: &ScoreTable) -> DatasetManifest {
        DatasetManifest::new(
            t.rows
                .iter()
                .map(|r| Example::new(r.example_id.clone(), "x", r.label))
                .collect(),
            vec!["a".into(), "b".into()],
        )
        .unwrap()
    }

    #[test]
    fn ranking_directions_and_ties() {
        let t = table(&[("a", 0, -1.0), ("b", 0, 0.0), ("c", 0, 2.0)]);
        assert_eq!(rank_hard_to_easy(&t, ScoreKind::Pvi).unwrap(), ["a", "b", "c"]);
        let t = table(&[("a", 0, 0.2), ("b", 0, 1.4), ("c", 0, 0.7)]);
        assert_eq!(rank_hard_to_easy(&t, ScoreKind::El2n).unwrap(), ["b", "c", "a"]);
        let t = table(&[("b", 0, 0.5), ("a", 0, 0.5)]);
        assert_eq!(rank_hard_to_easy(&t, ScoreKind::El2n).unwrap(), ["a", "b"]);
        assert_eq!(rank_hard_to_easy(&t, ScoreKind::Pvi).unwrap(), ["a", "b"]);
    }

    #[test]
    fn missing_score_is_an_error() {
        let mut t = table(&[("a", 0, 1.0)]);
        t.rows[0].pvi = None;
        assert!(matches!(
            rank_hard_to_easy(&t, ScoreKind::Pvi),
            Err(PruneError::MissingScore { .. })
        ));
    }

    #[test]
    fn hard_removes_highest_el2n() {
        let values: Vec<(String, usize, f64)> = (0..10).map(|i| (format!("e{i}"), i % 2, i as f64 / 10.0)).collect();
        let refs: Vec<(&str, usize, f64)> = values.iter().map(|(id, l, v)| (id.as_str(), *l, *v)).collect();
        let t = table(&refs);
        let m = manifest_for(&t);
        let r = prune(&m, &t, &PruneSpec::ranked(ScoreKind::El2n, Direction::Hard, 0.2)).unwrap();
        assert_eq!(r.removed, ["e9", "e8"]);
        assert_eq!(r.retained.len(), 8);
        let r = prune(&m, &t, &PruneSpec::ranked(ScoreKind::El2n, Direction::Easy, 0.2)).unwrap();
        assert_eq!(r.removed, ["e0", "e1"]);
    }

    #[test]
    fn rate_zero_is_identity_and_rate_one_is_rejected() {
        let t = table(&[("a", 0, 1.0), ("b", 1, 2.0)]);
        let m = manifest_for(&t);
        let r = prune(&m, &t, &PruneSpec::ranked(ScoreKind::Pvi, Direction::Hard, 0.0)).unwrap();
        assert_eq!(r.retained, ["a", "b"]);
        assert!(r.removed.is_empty());
        assert_eq!(r.ratio_before, r.ratio_after);
        assert!(matches!(
            prune(&m, &t, &PruneSpec::random(1.0, 0)),
            Err(PruneError::InvalidRate(_))
        ));
    }

    #[test]
    fn random_is_seeded() {
        let values: Vec<(String, usize, f64)> = (0..40).map(|i| (format!("e{i:02}"), i % 2, 0.0)).collect();
        let refs: Vec<(&str, usize, f64)> = values.iter().map(|(id, l, v)| (id.as_str(), *l, *v)).collect();
        let t = table(&refs);
        let m = manifest_for(&t);
        let a = prune(&m, &t, &PruneSpec::random(0.3, 7)).unwrap();
        let b = prune(&m, &t, &PruneSpec::random(0.3, 7)).unwrap();
        let c = prune(&m, &t, &PruneSpec::random(0.3, 8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.removed, c.removed);
        assert_eq!(a.removed.len(), 12);
    }

    #[test]
    fn ratio_sentinels() {
        assert_eq!(class_ratio(&[5, 0], 1, 0), 0.0);
        assert_eq!(class_ratio(&[0, 3], 1, 0), f64::INFINITY);
        assert_eq!(minority_majority(&[18865, 4676]), (1, 0));
        let r = class_ratio(&[18865, 4676], 1, 0);
        assert!((r - 0.24787).abs() < 1e-5);
    }

    #[test]
    fn stratified_keeps_class_quotas() {
        // 12 majority, 4 minority; minority ids are the hardest
        let values: Vec<(String, usize, f64)> = (0..16)
            .map(|i| (format!("e{i:02}"), usize::from(i < 4), if i < 4 { 1.0 } else { 0.1 }))
            .collect();
        let refs: Vec<(&str, usize, f64)> = values.iter().map(|(id, l, v)| (id.as_str(), *l, *v)).collect();
        let t = table(&refs);
        let m = manifest_for(&t);
        let plain = prune(&m, &t, &PruneSpec::ranked(ScoreKind::El2n, Direction::Hard, 0.25)).unwrap();
        assert_eq!(plain.retained_per_class, [12, 0]);
        let strat = prune(
            &m,
            &t,
            &PruneSpec::ranked(ScoreKind::El2n, Direction::Hard, 0.25).stratified(),
        )
        .unwrap();
        assert_eq!(strat.retained_per_class, [9, 3]);
        assert_eq!(strat.ratio_after, strat.ratio_before);
    }
}
