use datadiet::corpus::load_manifest;
use datadiet::dynamics::{read_log, validate_external};
use datadiet::evaluation::{evaluate, final_predictions, score_vs_correctness, top_k};
use datadiet::provenance::csv_header_line;
use datadiet::pruning::Direction;
use datadiet::scores::{read_score_table, ScoreKind};
use datadiet::trainer::read_checkpoint;
use serde_json::json;

use super::stamp;
use crate::error::CliError;
use crate::output::{file_hash, manifest, write_file};
use crate::{EvalArgs, InspectArgs, ValidateArgs};

pub fn eval(args: EvalArgs) -> Result<(), CliError> {
    let checkpoint = read_checkpoint(&args.checkpoint)?;
    let m = manifest(&args.manifest)?;
    let report = evaluate(&checkpoint, &m)?;
    println!("macro_f1\t{:.6}", report.macro_f1);
    println!("class\tlabel\tprecision\trecall\tf1\tsupport");
    for c in &report.per_class {
        let name = m.label_names().get(c.label).map_or("?", String::as_str);
        println!("{}\t{name}\t{:.6}\t{:.6}\t{:.6}\t{}", c.label, c.precision, c.recall, c.f1, c.support);
    }
    println!("confusion (rows gold, columns predicted)");
    for row in &report.confusion {
        println!("{}", row.iter().map(usize::to_string).collect::<Vec<_>>().join("\t"));
    }
    if let Some(out) = &args.out {
        let (_, provenance) = stamp(
            "eval",
            json!({
                "checkpoint": file_hash(&args.checkpoint)?,
                "manifest": file_hash(&args.manifest)?,
            }),
        );
        let body = json!({ "provenance": provenance, "report": report });
        let mut text = serde_json::to_string_pretty(&body).expect("report serializes");
        text.push('\n');
        write_file(out, text)?;
    }
    Ok(())
}

pub fn inspect(args: InspectArgs) -> Result<(), CliError> {
    let kind: ScoreKind = args.score.parse().map_err(CliError::usage)?;
    let direction: Direction = args.direction.parse().map_err(CliError::usage)?;
    let table = read_score_table(&args.scores)?;
    if !table.has(kind) {
        return Err(CliError::data(
            "score",
            format!("{} has no {kind} column values", args.scores.display()),
        ));
    }
    let m = args.manifest.as_deref().map(manifest).transpose()?;
    let entries = top_k(&table, m.as_ref(), kind, direction, args.k)?;
    println!("rank\texample_id\tlabel\t{kind}\ttext");
    for e in &entries {
        println!("{}\t{}\t{}\t{:.6}\t{}", e.rank, e.example_id, e.label, e.score, e.text);
    }

    if !args.logs.is_empty() {
        let runs = args.logs.iter().map(|p| read_log(p)).collect::<Result<Vec<_>, _>>()?;
        let summary = score_vs_correctness(&table, &final_predictions(&runs))?;
        for (score, lo, hi) in &summary.ranges {
            log::info!("{score}: histogram range [{lo}, {hi}]");
        }
        if let Some(out) = &args.summary_out {
            let mut hashes = vec![file_hash(&args.scores)?];
            for p in &args.logs {
                hashes.push(file_hash(p)?);
            }
            let (hash, _) = stamp("inspect", json!({ "inputs": hashes }));
            write_file(out, summary.to_csv(Some(&csv_header_line(&hash))))?;
            println!("{}", out.display());
        }
    }
    Ok(())
}

pub fn validate(args: ValidateArgs) -> Result<(), CliError> {
    if let Some(path) = &args.log {
        let report = validate_external(path)?;
        for a in &report.advisories {
            log::warn!("{a}");
        }
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        if !report.is_valid() {
            let total: usize = report.violations.values().sum();
            let kinds: Vec<&str> = report.violations.keys().map(String::as_str).collect();
            return Err(CliError::data(
                "validation",
                format!("{}: {total} invariant violations ({})", path.display(), kinds.join(", ")),
            ));
        }
        println!("{}: valid", path.display());
    }
    if let Some(path) = &args.manifest {
        let m = load_manifest(path)?;
        println!(
            "{}: valid, {} examples, class counts {:?}",
            path.display(),
            m.len(),
            m.class_counts()
        );
    }
    Ok(())
}
