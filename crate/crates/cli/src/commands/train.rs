use std::path::Path;

use datadiet::corpus::DatasetManifest;
use datadiet::dynamics::{record_dynamics, write_log, RunDynamics};
use datadiet::trainer::{train as fit, write_checkpoint, Checkpoint, TrainerConfig};
use serde_json::{json, Value};

use super::stamp;
use crate::config::RunConfigFile;
use crate::error::CliError;
use crate::output::{ensure_dir, file_hash, manifest};
use crate::TrainArgs;

pub const DEFAULT_RUNS: usize = 3;

/// Train one model per seed and record its dynamics (with null-model probabilities if `null`).
pub fn train_runs(
    m: &DatasetManifest,
    trainer: &TrainerConfig,
    seeds: &[u64],
    null: bool,
    provenance: &Value,
) -> Result<Vec<(Vec<Checkpoint>, RunDynamics)>, CliError> {
    seeds
        .iter()
        .map(|&seed| {
            let cps = fit(m, &trainer.with_seed(seed))?;
            let mut run = record_dynamics(&cps, m, null)?;
            run.provenance = Some(provenance.clone());
            log::info!(
                "run seed {seed}: {} epochs, final loss {:.4}",
                cps.len(),
                cps.last().map_or(f64::NAN, |c| c.mean_loss)
            );
            Ok((cps, run))
        })
        .collect()
}

pub fn log_path(dir: &Path, seed: u64) -> std::path::PathBuf {
    dir.join(format!("run-{seed}.ddlog"))
}

pub fn train(args: TrainArgs) -> Result<(), CliError> {
    let cfg = RunConfigFile::load_opt(args.config.as_deref())?;
    let trainer = cfg.trainer.apply(TrainerConfig::default());
    trainer.validate()?;
    let runs = args.runs.or(cfg.runs).unwrap_or(DEFAULT_RUNS);
    if runs == 0 {
        return Err(CliError::usage("--runs must be at least 1"));
    }
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let seeds: Vec<u64> = (0..runs as u64).map(|i| seed + i).collect();

    let m = manifest(&args.manifest)?;
    let (_, provenance) = stamp(
        "train",
        json!({
            "manifest": file_hash(&args.manifest)?,
            "trainer": trainer,
            "seeds": seeds,
            "null": args.null,
        }),
    );
    ensure_dir(&args.out_dir)?;
    for (cps, run) in train_runs(&m, &trainer, &seeds, args.null, &provenance)? {
        let path = log_path(&args.out_dir, run.seed);
        write_log(&run, &path).map_err(|e| CliError::write(&path, e))?;
        println!("{}", path.display());
        if args.save_checkpoints {
            let dir = args.out_dir.join("checkpoints").join(format!("seed-{}", run.seed));
            ensure_dir(&dir)?;
            for cp in &cps {
                let p = dir.join(format!("epoch-{:02}.ckpt", cp.epoch));
                write_checkpoint(cp, &p).map_err(|e| CliError::write(&p, e))?;
            }
            println!("{}", dir.display());
        }
    }
    Ok(())
}
