use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, DatasetManifest, Example, Split};

/// Split `n_total` items into per-class quotas that sum to `round(fraction * n_total)`,
/// using largest remainders (ties go to the lower class index).
pub(crate) fn apportion(class_sizes: &[usize], fraction: f64, total: usize) -> Vec<usize> {
    let mut quotas: Vec<usize> = class_sizes
        .iter()
        .map(|&n| ((n as f64 * fraction) + 1e-9).floor() as usize)
        .collect();
    let assigned: usize = quotas.iter().sum();
    let mut remainders: Vec<(usize, f64)> = class_sizes
        .iter()
        .enumerate()
        .map(|(k, &n)| (k, n as f64 * fraction - quotas[k] as f64))
        .collect();
    remainders.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut missing = total.saturating_sub(assigned);
    for (k, _) in remainders.iter().cycle() {
        if missing == 0 {
            break;
        }
        if quotas[*k] < class_sizes[*k] {
            quotas[*k] += 1;
            missing -= 1;
        } else if quotas.iter().zip(class_sizes).all(|(q, n)| q >= n) {
            break;
        }
    }
    quotas
}

/// Stratified, seeded train/test split.
///
/// `|train| = round(train_fraction * n)`; per-class train counts are the
/// largest-remainder apportionment of that total. Both halves keep the input order.
pub fn split_manifest(
    manifest: &DatasetManifest,
    train_fraction: f64,
    seed: u64,
) -> Result<(DatasetManifest, DatasetManifest), CorpusError> {
    if manifest.is_empty() {
        return Err(CorpusError::EmptyManifest);
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CorpusError::InvalidFraction(train_fraction));
    }
    let n = manifest.len();
    let n_train = (train_fraction * n as f64).round() as usize;
    let counts = manifest.class_counts();
    let quotas = apportion(&counts, train_fraction, n_train);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = HashSet::with_capacity(n_train);
    for (label, &quota) in quotas.iter().enumerate() {
        let mut members: Vec<usize> = manifest
            .examples()
            .iter()
            .enumerate()
            .filter(|(_, e)| e.label == label)
            .map(|(i, _)| i)
            .collect();
        members.shuffle(&mut rng);
        train_idx.extend(members.into_iter().take(quota));
    }

    let (train, test): (Vec<(usize, &Example)>, Vec<(usize, &Example)>) = manifest
        .examples()
        .iter()
        .enumerate()
        .partition(|(i, _)| train_idx.contains(i));
    let build = |part: Vec<(usize, &Example)>, split| {
        DatasetManifest::new(
            part.into_iter().map(|(_, e)| e.clone()).collect(),
            manifest.label_names().to_vec(),
        )
        .map(|m| m.with_split(Some(split)))
    };
    Ok((build(train, Split::Train)?, build(test, Split::Test)?))
}

/// Concatenate two manifests over the same label vocabulary.
///
/// Ids present in both inputs are rewritten as `<source>/<id>` on both sides,
/// where `<source>` is the example's source tag (`a` / `b` when untagged).
pub fn combine_manifests(
    a: &DatasetManifest,
    b: &DatasetManifest,
) -> Result<DatasetManifest, CorpusError> {
    if a.label_names() != b.label_names() {
        return Err(CorpusError::VocabularyMismatch {
            left: a.label_names().to_vec(),
            right: b.label_names().to_vec(),
        });
    }
    let a_ids: HashSet<&str> = a.ids().collect();
    let b_ids: HashSet<&str> = b.ids().collect();
    let rename = |ex: &Example, fallback: &str, other: &HashSet<&str>| {
        let mut ex = ex.clone();
        if other.contains(ex.id.as_str()) {
            let tag = ex.source.as_deref().unwrap_or(fallback);
            ex.id = format!("{tag}/{}", ex.id);
        }
        ex
    };
    let examples = a
        .examples()
        .iter()
        .map(|e| rename(e, "a", &b_ids))
        .chain(b.examples().iter().map(|e| rename(e, "b", &a_ids)))
        .collect();
    DatasetManifest::new(examples, a.label_names().to_vec())
}
