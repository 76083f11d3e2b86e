use std::collections::BTreeSet;

use datadiet::corpus::save_manifest;
use datadiet::dynamics::read_log;
use datadiet::provenance::csv_header_line;
use datadiet::pruning::{prune as prune_manifest, Direction, PruneSpec};
use datadiet::scores::{read_score_table, score_runs, write_score_table, El2nPolicy, ScoreConfig, ScoreKind, ScoreTable};
use serde_json::json;

use super::stamp;
use crate::config::{rates_from_percents, RunConfigFile};
use crate::error::CliError;
use crate::output::{ensure_parent, file_hash, manifest};
use crate::{PruneArgs, ScoreArgs};

/// `pvi`, `el2n`, `vog`, comma lists of those, or `all` (`None`).
pub fn parse_score_list(arg: &str) -> Result<Option<BTreeSet<ScoreKind>>, CliError> {
    if arg == "all" {
        return Ok(None);
    }
    arg.split(',')
        .map(|s| s.trim().parse::<ScoreKind>().map_err(CliError::usage))
        .collect::<Result<BTreeSet<_>, _>>()
        .map(Some)
}

pub fn parse_policy(arg: Option<&str>) -> Result<El2nPolicy, CliError> {
    arg.map_or(Ok(El2nPolicy::default()), |s| s.parse().map_err(CliError::usage))
}

pub fn score(args: ScoreArgs) -> Result<(), CliError> {
    let cfg = RunConfigFile::load_opt(args.config.as_deref())?;
    let policy = parse_policy(args.el2n_policy.as_deref().or(cfg.el2n_policy.as_deref()))?;
    let requested = parse_score_list(&args.score)?;
    let wants = |k: ScoreKind| requested.as_ref().is_some_and(|r| r.contains(&k));

    let mut runs = Vec::with_capacity(args.logs.len());
    let mut hashes = Vec::with_capacity(args.logs.len());
    for path in &args.logs {
        runs.push(read_log(path)?);
        hashes.push(file_hash(path)?);
    }
    if wants(ScoreKind::Pvi) {
        if let Some((path, _)) = args.logs.iter().zip(&runs).find(|(_, r)| !r.has_null) {
            return Err(CliError::data(
                "missing-null",
                format!("PVI needs null-model probabilities, but {} has none (train with --null)", path.display()),
            ));
        }
    }
    if wants(ScoreKind::Vog) {
        if let Some((path, _)) = args.logs.iter().zip(&runs).find(|(_, r)| r.grad_dim.is_none()) {
            return Err(CliError::data(
                "missing-gradients",
                format!("VoG needs input gradients, but {} has none", path.display()),
            ));
        }
    }

    let mut table = score_runs(&runs, &ScoreConfig { el2n_policy: policy })?;
    if requested.is_none() {
        if !table.has(ScoreKind::Pvi) {
            log::warn!("PVI skipped: the logs carry no null-model probabilities");
        }
        if !table.has(ScoreKind::Vog) {
            log::warn!("VoG skipped: the logs carry no gradients");
        }
    } else {
        for row in &mut table.rows {
            if !wants(ScoreKind::Pvi) {
                row.pvi = None;
            }
            if !wants(ScoreKind::Vog) {
                row.vog_raw = None;
                row.vog_norm = None;
            }
        }
    }
    if table.meta.clamped_probabilities > 0 {
        log::warn!(
            "{} probabilities fell below the floor before taking log2",
            table.meta.clamped_probabilities
        );
    }

    let (hash, _) = stamp("score", json!({ "logs": hashes, "el2n_policy": policy.to_string(), "score": args.score }));
    ensure_parent(&args.out)?;
    write_score_table(&table, &args.out, Some(&csv_header_line(&hash))).map_err(|e| CliError::write(&args.out, e))?;
    println!("{}\t{} examples, {} runs", args.out.display(), table.rows.len(), runs.len());
    Ok(())
}

pub fn prune(args: PruneArgs) -> Result<(), CliError> {
    let rate = rates_from_percents(&[args.rate])?[0];
    let mut spec = if args.direction == "random" {
        PruneSpec::random(rate, args.seed)
    } else {
        let direction: Direction = args.direction.parse().map_err(CliError::usage)?;
        let kind: ScoreKind = args
            .score
            .as_deref()
            .ok_or_else(|| CliError::usage("--score is required unless --direction random"))?
            .parse()
            .map_err(CliError::usage)?;
        PruneSpec::ranked(kind, direction, rate)
    };
    if args.stratified {
        spec = spec.stratified();
    }
    let table = match (&args.scores, args.direction.as_str()) {
        (Some(path), _) => read_score_table(path)?,
        (None, "random") => ScoreTable::default(),
        (None, _) => return Err(CliError::usage("--scores is required unless --direction random")),
    };

    let m = manifest(&args.manifest)?;
    let result = prune_manifest(&m, &table, &spec)?;
    let score_hash = match &args.scores {
        Some(p) => Some(file_hash(p)?),
        None => None,
    };
    let (_, provenance) = stamp(
        "prune",
        json!({
            "manifest": file_hash(&args.manifest)?,
            "score_table": score_hash,
            "spec": spec,
        }),
    );
    ensure_parent(&args.out)?;
    save_manifest(&result.apply(&m).with_provenance(Some(provenance)), &args.out)?;
    println!(
        "{}\tremoved {} of {}, minority ratio {:.4} -> {:.4}",
        args.out.display(),
        result.removed.len(),
        m.len(),
        result.ratio_before,
        result.ratio_after
    );
    Ok(())
}
