use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;

use super::{class_ratio_curve, prune, Direction, PruneError, PruneSpec, Selection, RATE_GRID};
use crate::corpus::DatasetManifest;
use crate::evaluation::evaluate;
use crate::numfmt::sig9;
use crate::scores::{ScoreKind, ScoreTable};
use crate::trainer::{train, TrainerConfig};

#[derive(Debug, Clone, Serialize)]
pub struct SweepConfig {
    /// Used as-is for every cell (callers usually pass `TrainerConfig::retrain()`).
    pub retrain: TrainerConfig,
    /// Concurrent cells; 0 lets the thread pool decide.
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub score: String,
    pub direction: String,
    pub rate: f64,
    pub eval_set: String,
    /// `None` when the cell failed.
    pub macro_f1: Option<f64>,
    pub minority_ratio: Option<f64>,
    /// Retraining seed.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub score: String,
    pub direction: String,
    pub stratified: bool,
    pub rate: f64,
    pub minority_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepFailure {
    pub spec: PruneSpec,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepReport {
    /// One row per (spec, eval set), in spec order.
    pub rows: Vec<SweepRow>,
    pub curve: Vec<CurvePoint>,
    pub failures: Vec<SweepFailure>,
    pub warnings: Vec<String>,
}

/// Seed for the random prune at `rate`: distinct per rate, fixed by `base`.
pub fn random_prune_seed(base: u64, rate: f64) -> u64 {
    base.wrapping_mul(10_007)
        .wrapping_add((rate * 10_000.0).round() as u64)
}

/// Every score in both directions over `rates`, then random pruning at each rate.
pub fn standard_specs(rates: &[f64], seed: u64) -> Vec<PruneSpec> {
    let mut specs = Vec::with_capacity(rates.len() * 7);
    for score in ScoreKind::ALL {
        for direction in [Direction::Hard, Direction::Easy] {
            specs.extend(rates.iter().map(|&r| PruneSpec::ranked(score, direction, r)));
        }
    }
    specs.extend(rates.iter().map(|&r| PruneSpec::random(r, random_prune_seed(seed, r))));
    specs
}

/// The default 70-cell grid.
pub fn default_specs(seed: u64) -> Vec<PruneSpec> {
    standard_specs(&RATE_GRID, seed)
}

fn direction_label(spec: &PruneSpec) -> String {
    if spec.stratified {
        format!("{}-stratified", spec.selection.direction_name())
    } else {
        spec.selection.direction_name().to_string()
    }
}

fn run_cell(
    manifest: &DatasetManifest,
    table: &ScoreTable,
    spec: &PruneSpec,
    eval_sets: &[(String, DatasetManifest)],
    config: &SweepConfig,
) -> (Option<f64>, Result<Vec<f64>, String>) {
    let result = match prune(manifest, table, spec) {
        Ok(r) => r,
        Err(e) => return (None, Err(e.to_string())),
    };
    let retained = result.apply(manifest);
    let scores = train(&retained, &config.retrain)
        .map_err(|e| e.to_string())
        .and_then(|cps| {
            let last = cps.last().expect("at least one epoch");
            eval_sets
                .iter()
                .map(|(name, m)| {
                    evaluate(last, m)
                        .map(|r| r.macro_f1)
                        .map_err(|e| format!("{name}: {e}"))
                })
                .collect()
        });
    (Some(result.ratio_after), scores)
}

/// Prune, retrain on the retained set and evaluate, for every spec.
///
/// Duplicate specs run once. A failing cell yields rows with empty metrics and
/// a [`SweepFailure`]; the other cells are unaffected.
pub fn sweep(
    manifest: &DatasetManifest,
    table: &ScoreTable,
    specs: &[PruneSpec],
    eval_sets: &[(String, DatasetManifest)],
    config: &SweepConfig,
) -> Result<SweepReport, PruneError> {
    if manifest.is_empty() {
        return Err(PruneError::EmptyManifest);
    }
    if eval_sets.is_empty() {
        return Err(PruneError::InvalidSweep("no evaluation sets".into()));
    }
    config
        .retrain
        .validate()
        .map_err(|e| PruneError::InvalidSweep(e.to_string()))?;
    let mut report = SweepReport::default();
    let mut seen = HashSet::new();
    let mut unique = Vec::with_capacity(specs.len());
    for spec in specs {
        spec.validate()?;
        if seen.insert(spec.key()) {
            unique.push(*spec);
        } else {
            let msg = format!(
                "duplicate spec {} {} rate {} skipped",
                spec.selection.score_name(),
                direction_label(spec),
                sig9(spec.rate)
            );
            log::warn!("{msg}");
            report.warnings.push(msg);
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| PruneError::InvalidSweep(e.to_string()))?;
    let cells: Vec<_> = pool.install(|| {
        unique
            .par_iter()
            .map(|spec| run_cell(manifest, table, spec, eval_sets, config))
            .collect()
    });

    for (spec, (ratio, scores)) in unique.iter().zip(cells) {
        let f1s: Vec<Option<f64>> = match scores {
            Ok(v) => v.into_iter().map(Some).collect(),
            Err(error) => {
                log::warn!("sweep cell failed: {error}");
                report.failures.push(SweepFailure { spec: *spec, error });
                vec![None; eval_sets.len()]
            }
        };
        for ((name, _), macro_f1) in eval_sets.iter().zip(f1s) {
            report.rows.push(SweepRow {
                score: spec.selection.score_name().to_string(),
                direction: direction_label(spec),
                rate: spec.rate,
                eval_set: name.clone(),
                macro_f1,
                minority_ratio: ratio,
                seed: config.retrain.seed,
            });
        }
    }
    report.curve = ratio_curves(manifest, table, &unique);
    Ok(report)
}

/// Ratio curves for every selection in `specs`, plain and stratified, from rate 0.
fn ratio_curves(manifest: &DatasetManifest, table: &ScoreTable, specs: &[PruneSpec]) -> Vec<CurvePoint> {
    let mut rates: Vec<f64> = specs.iter().map(|s| s.rate).collect();
    rates.push(0.0);
    rates.sort_by(f64::total_cmp);
    rates.dedup();
    let mut bases: Vec<PruneSpec> = Vec::new();
    for spec in specs {
        if !bases.iter().any(|b| b.selection == spec.selection) {
            bases.push(*spec);
        }
    }
    let mut points = Vec::new();
    for base in bases {
        for stratified in [false, true] {
            let spec = PruneSpec { stratified, ..base };
            // random selections get their per-rate seed back
            let curve = if base.selection == Selection::Random {
                rates
                    .iter()
                    .map(|&rate| {
                        let s = specs
                            .iter()
                            .find(|s| s.selection == Selection::Random && s.rate == rate)
                            .map_or(spec.seed, |s| s.seed);
                        class_ratio_curve(manifest, table, &PruneSpec { seed: s, ..spec }, &[rate])
                            .map(|v| v[0])
                    })
                    .collect::<Result<Vec<_>, _>>()
            } else {
                class_ratio_curve(manifest, table, &spec, &rates)
            };
            // a missing score already surfaces as a cell failure
            let Ok(curve) = curve else { continue };
            points.extend(curve.into_iter().map(|(rate, minority_ratio)| CurvePoint {
                score: base.selection.score_name().to_string(),
                direction: direction_label(&spec),
                stratified,
                rate,
                minority_ratio,
            }));
        }
    }
    points
}

impl SweepReport {
    pub const REPORT_COLUMNS: &'static str = "score,direction,rate,eval_set,macro_f1,minority_ratio,seed";
    pub const CURVE_COLUMNS: &'static str = "score,direction,stratified,rate,minority_ratio";

    pub fn report_csv(&self, header_line: Option<&str>) -> String {
        let mut out = header_line.unwrap_or_default().to_string();
        out.push_str(Self::REPORT_COLUMNS);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.score,
                r.direction,
                sig9(r.rate),
                csv_field(&r.eval_set),
                r.macro_f1.map(sig9).unwrap_or_default(),
                r.minority_ratio.map(sig9).unwrap_or_default(),
                r.seed
            ));
        }
        out
    }

    pub fn curve_csv(&self, header_line: Option<&str>) -> String {
        let mut out = header_line.unwrap_or_default().to_string();
        out.push_str(Self::CURVE_COLUMNS);
        out.push('\n');
        for p in &self.curve {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.score,
                p.direction,
                p.stratified,
                sig9(p.rate),
                sig9(p.minority_ratio)
            ));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
