use std::path::PathBuf;

use datadiet::corpus::{save_manifest, split_manifest, synthesize_fixture, DatasetManifest, FixtureSpec, HardnessMode};
use datadiet::dynamics::write_log;
use datadiet::provenance::csv_header_line;
use datadiet::pruning::{random_prune_seed, sweep as run_sweep, Direction, PruneSpec, SweepConfig, RATE_GRID};
use datadiet::scores::{score_runs, write_score_table, ScoreConfig, ScoreKind};
use datadiet::trainer::TrainerConfig;
use serde_json::json;

use super::score::parse_policy;
use super::stamp;
use super::train::{log_path, train_runs, DEFAULT_RUNS};
use crate::config::{parse_eval_arg, rates_from_percents, RunConfigFile};
use crate::error::CliError;
use crate::output::{ensure_dir, file_hash, manifest, require_exists, write_file};
use crate::SweepArgs;

const DEFAULT_FIXTURE_N: usize = 2000;
const DEFAULT_FIXTURE_SEED: u64 = 1;
/// Share of a manifest kept for training when no evaluation set is given.
const TRAIN_FRACTION: f64 = 0.7;

/// Every (score, direction, rate) combination requested, then random at each rate.
fn build_specs(scores: &[ScoreKind], directions: &[String], rates: &[f64], seed: u64, stratified: bool) -> Vec<PruneSpec> {
    let mut specs = Vec::new();
    for &score in scores {
        for d in [Direction::Hard, Direction::Easy] {
            if directions.iter().any(|x| x == d.as_str()) {
                specs.extend(rates.iter().map(|&r| PruneSpec::ranked(score, d, r)));
            }
        }
    }
    if directions.iter().any(|x| x == "random") {
        specs.extend(rates.iter().map(|&r| PruneSpec::random(r, random_prune_seed(seed, r))));
    }
    if stratified {
        let extra: Vec<PruneSpec> = specs.iter().map(|s| s.stratified()).collect();
        specs.extend(extra);
    }
    specs
}

pub fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let cfg = RunConfigFile::load_opt(args.config.as_deref())?;
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let runs = args.runs.or(cfg.runs).unwrap_or(DEFAULT_RUNS);
    if runs == 0 {
        return Err(CliError::usage("--runs must be at least 1"));
    }
    let jobs = args.jobs.or(cfg.jobs).unwrap_or(0);
    let rates = match args.rates.as_ref().or(cfg.rates.as_ref()) {
        Some(p) => rates_from_percents(p)?,
        None => RATE_GRID.to_vec(),
    };
    let scores: Vec<ScoreKind> = match args.scores.as_ref().or(cfg.scores.as_ref()) {
        Some(list) => list
            .iter()
            .map(|s| s.parse().map_err(CliError::usage))
            .collect::<Result<_, _>>()?,
        None => ScoreKind::ALL.to_vec(),
    };
    let directions: Vec<String> = args
        .directions
        .clone()
        .or(cfg.directions.clone())
        .unwrap_or_else(|| vec!["hard".into(), "easy".into(), "random".into()]);
    if let Some(bad) = directions.iter().find(|d| !["hard", "easy", "random"].contains(&d.as_str())) {
        return Err(CliError::usage(format!("unknown direction {bad:?} (expected hard, easy or random)")));
    }
    let stratified = args.stratified || cfg.stratified.unwrap_or(false);
    let policy = parse_policy(args.el2n_policy.as_deref().or(cfg.el2n_policy.as_deref()))?;
    let trainer = cfg.trainer.apply(TrainerConfig::default());
    trainer.validate()?;

    let eval_args = if args.eval.is_empty() { cfg.eval.clone().unwrap_or_default() } else { args.eval.clone() };
    let mut extra_evals = Vec::new();
    for arg in &eval_args {
        let (name, path) = parse_eval_arg(arg)?;
        require_exists(&path)?;
        extra_evals.push((name, path));
    }
    let out_dir = args
        .out_dir
        .clone()
        .or(cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("sweep-out"));

    // training set and the built-in held-out set
    let fixture = args.fixture.clone().or(if args.manifest.is_some() { None } else { cfg.fixture.clone() });
    let manifest_path = args.manifest.clone().or(if args.fixture.is_some() { None } else { cfg.manifest.clone() });
    let (source, train_set, heldout) = match (fixture, manifest_path) {
        (Some(mode), None) => {
            let mode: HardnessMode = mode.parse().map_err(CliError::usage)?;
            let spec = FixtureSpec {
                n_examples: args.fixture_n.or(cfg.fixture_n).unwrap_or(DEFAULT_FIXTURE_N),
                hardness_mode: mode,
                seed: args.fixture_seed.or(cfg.fixture_seed).unwrap_or(DEFAULT_FIXTURE_SEED),
                ..FixtureSpec::default()
            };
            let heldout_spec = FixtureSpec { seed: spec.seed.wrapping_add(1), ..spec.clone() };
            let train_set = synthesize_fixture(&spec)?;
            let heldout = synthesize_fixture(&heldout_spec)?;
            (json!({ "fixture": spec, "heldout": heldout_spec }), train_set, Some(heldout))
        }
        (None, Some(path)) => {
            require_exists(&path)?;
            let m = manifest(&path)?;
            let source = json!({ "manifest": file_hash(&path)? });
            if extra_evals.is_empty() {
                let (train, test) = split_manifest(&m, TRAIN_FRACTION, seed)?;
                (json!({ "split": { "source": source, "train_fraction": TRAIN_FRACTION } }), train, Some(test))
            } else {
                (source, m, None)
            }
        }
        (Some(_), Some(_)) => return Err(CliError::usage("give either a fixture or a manifest, not both")),
        (None, None) => return Err(CliError::usage("sweep needs --fixture MODE or --manifest PATH")),
    };
    let mut eval_sets: Vec<(String, DatasetManifest)> = heldout.map(|h| ("heldout".to_string(), h)).into_iter().collect();
    let mut eval_hashes = Vec::new();
    for (name, path) in &extra_evals {
        if eval_sets.iter().any(|(n, _)| n == name) {
            return Err(CliError::usage(format!("evaluation set name {name:?} is used twice")));
        }
        eval_sets.push((name.clone(), manifest(path)?));
        eval_hashes.push(json!([name, file_hash(path)?]));
    }

    let seeds: Vec<u64> = (0..runs as u64).map(|i| seed + i).collect();
    let specs = build_specs(&scores, &directions, &rates, seed, stratified);
    let (hash, provenance) = stamp(
        "sweep",
        json!({
            "source": source,
            "eval": eval_hashes,
            "trainer": trainer,
            "seeds": seeds,
            "el2n_policy": policy.to_string(),
            "specs": specs,
        }),
    );
    let header = csv_header_line(&hash);

    ensure_dir(&out_dir)?;
    save_manifest(&train_set.clone().with_provenance(Some(provenance.clone())), &out_dir.join("train.csv"))?;
    for (name, m) in &eval_sets {
        if extra_evals.iter().all(|(n, _)| n != name) {
            save_manifest(&m.clone().with_provenance(Some(provenance.clone())), &out_dir.join(format!("{name}.csv")))?;
        }
    }

    log::info!("training {runs} reference runs on {} examples", train_set.len());
    let logs_dir = out_dir.join("logs");
    ensure_dir(&logs_dir)?;
    let mut dynamics = Vec::with_capacity(runs);
    for (_, run) in train_runs(&train_set, &trainer, &seeds, true, &provenance)? {
        let path = log_path(&logs_dir, run.seed);
        write_log(&run, &path).map_err(|e| CliError::write(&path, e))?;
        dynamics.push(run);
    }
    let table = score_runs(&dynamics, &ScoreConfig { el2n_policy: policy })?;
    let scores_path = out_dir.join("scores.csv");
    write_score_table(&table, &scores_path, Some(&header)).map_err(|e| CliError::write(&scores_path, e))?;

    log::info!("running {} sweep cells", specs.len());
    let sweep_cfg = SweepConfig {
        retrain: trainer.retrain().with_seed(seed),
        jobs,
    };
    let report = run_sweep(&train_set, &table, &specs, &eval_sets, &sweep_cfg)?;
    for f in &report.failures {
        log::warn!(
            "cell {} {} rate {} failed: {}",
            f.spec.selection.score_name(),
            f.spec.selection.direction_name(),
            f.spec.rate,
            f.error
        );
    }
    let report_path = out_dir.join("report.csv");
    let curve_path = out_dir.join("curve.csv");
    write_file(&report_path, report.report_csv(Some(&header)))?;
    write_file(&curve_path, report.curve_csv(Some(&header)))?;
    println!("{}\t{} rows", report_path.display(), report.rows.len());
    println!("{}\t{} points", curve_path.display(), report.curve.len());
    if !report.failures.is_empty() {
        println!("{} of {} cells failed", report.failures.len(), specs.len());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use datadiet::pruning::default_specs;

    #[test]
    fn default_arguments_give_the_standard_grid() {
        let all = ["hard", "easy", "random"].map(String::from);
        assert_eq!(build_specs(&ScoreKind::ALL, &all, &RATE_GRID, 7, false), default_specs(7));
        assert_eq!(build_specs(&ScoreKind::ALL, &all, &RATE_GRID, 7, true).len(), 140);
        assert_eq!(build_specs(&[ScoreKind::El2n], &all[..1], &[0.1], 7, false).len(), 1);
    }
}
