use datadiet::corpus::{save_manifest, split_manifest, synthesize_fixture, FixtureSpec, HardnessMode};
use serde_json::json;

use super::stamp;
use crate::error::CliError;
use crate::output::{ensure_dir, ensure_parent, file_hash, manifest};
use crate::{SplitArgs, SynthArgs};

pub fn split(args: SplitArgs) -> Result<(), CliError> {
    let m = manifest(&args.manifest)?;
    let (_, provenance) = stamp(
        "split",
        json!({
            "manifest": file_hash(&args.manifest)?,
            "train_fraction": args.train_fraction,
            "seed": args.seed,
        }),
    );
    let (train, test) = split_manifest(&m, args.train_fraction, args.seed)?;
    ensure_dir(&args.out_dir)?;
    for (name, part) in [("train.csv", train), ("test.csv", test)] {
        let path = args.out_dir.join(name);
        let n = part.len();
        save_manifest(&part.with_provenance(Some(provenance.clone())), &path)?;
        println!("{}\t{n} examples", path.display());
    }
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<(), CliError> {
    let mode: HardnessMode = args.mode.parse().map_err(CliError::usage)?;
    let spec = FixtureSpec {
        n_examples: args.n,
        minority_fraction: args.minority_fraction,
        hardness_mode: mode,
        vocabulary_size: args.vocabulary_size,
        seed: args.seed,
    };
    let m = synthesize_fixture(&spec)?;
    let (_, provenance) = stamp("synth", json!({ "fixture": spec }));
    let counts = m.class_counts();
    ensure_parent(&args.out)?;
    save_manifest(&m.with_provenance(Some(provenance)), &args.out)?;
    println!("{}\t{} examples, class counts {counts:?}", args.out.display(), args.n);
    Ok(())
}
