//! Synthetic two-class fixtures with controllable imbalance and difficulty.
//!
//! Vocabulary tokens are split into three pools: a shared pool, a
//! majority-cue pool and a minority-cue pool. The hardness mode decides how
//! texts of each class draw from them.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, DatasetManifest, Example};

pub const MAJORITY_LABEL: usize = 0;
pub const MINORITY_LABEL: usize = 1;

/// Every fixture text has this many tokens. A fixed length keeps the weight of
/// a single cue token in the mean-pooled embedding the same for all texts.
const TEXT_TOKENS: usize = 12;
/// Minority texts in `minority_hard` mode carry this many minority-cue tokens;
/// the rest of the text follows the majority distribution.
const HARD_MINORITY_CUES: usize = 1;
/// Share of majority texts (rounded to a count) in `minority_hard` mode that
/// also carry a minority cue. At 0.25 minority this puts P(minority | cue)
/// just under one half.
const CUE_LEAK_RATE: f64 = 0.37;
/// Share of texts swapped to the other class's distribution in `uniform_noise` mode.
const NOISE_RATE: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HardnessMode {
    /// The classes use disjoint token sets.
    Separable,
    /// Minority texts look like majority texts plus a cue token that a share
    /// of majority texts also carries.
    MinorityHard,
    /// Separable token sets, but a uniform share of texts in both classes is
    /// drawn from the other class's distribution.
    UniformNoise,
}

impl HardnessMode {
    pub fn as_str(self) -> &'static str {
        match self {
            HardnessMode::Separable => "separable",
            HardnessMode::MinorityHard => "minority_hard",
            HardnessMode::UniformNoise => "uniform_noise",
        }
    }
}

impl fmt::Display for HardnessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HardnessMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "separable" => Ok(HardnessMode::Separable),
            "minority_hard" => Ok(HardnessMode::MinorityHard),
            "uniform_noise" => Ok(HardnessMode::UniformNoise),
            other => Err(format!(
                "unknown hardness mode {other:?} (expected separable, minority_hard or uniform_noise)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub n_examples: usize,
    pub minority_fraction: f64,
    pub hardness_mode: HardnessMode,
    pub vocabulary_size: usize,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            n_examples: 2000,
            minority_fraction: 0.25,
            hardness_mode: HardnessMode::MinorityHard,
            // small enough that texts cannot be memorized token by token
            vocabulary_size: 8,
            seed: 1,
        }
    }
}

impl FixtureSpec {
    pub fn minority_count(&self) -> usize {
        (self.n_examples as f64 * self.minority_fraction).round() as usize
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if !(self.minority_fraction > 0.0 && self.minority_fraction < 1.0) {
            return Err(CorpusError::InvalidFixture(format!(
                "minority_fraction {} must lie in (0, 1)",
                self.minority_fraction
            )));
        }
        if self.minority_count() < 1 {
            return Err(CorpusError::InvalidFixture(format!(
                "round({} * {}) = 0 minority examples",
                self.n_examples, self.minority_fraction
            )));
        }
        if self.vocabulary_size < 8 {
            return Err(CorpusError::InvalidFixture(format!(
                "vocabulary_size {} is below the minimum of 8",
                self.vocabulary_size
            )));
        }
        Ok(())
    }
}

struct Pools {
    shared: Vec<String>,
    majority: Vec<String>,
    minority: Vec<String>,
}

impl Pools {
    /// Separable mode gives each cue pool half the vocabulary and no shared pool.
    fn new(vocabulary_size: usize, with_shared: bool) -> Self {
        let (n_shared, n_cue) = if with_shared {
            let cue = vocabulary_size / 4;
            (vocabulary_size - 2 * cue, cue)
        } else {
            (0, vocabulary_size / 2)
        };
        let names = |prefix: &str, n: usize| (0..n).map(|i| format!("{prefix}{i}")).collect();
        Self {
            shared: names("sh", n_shared),
            majority: names("ma", n_cue),
            minority: names("mi", n_cue),
        }
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &'a [String]) -> &'a str {
    &pool[rng.gen_range(0..pool.len())]
}

/// Majority-distribution token: shared or majority-cue with equal odds.
fn majority_token<'a>(rng: &mut ChaCha8Rng, pools: &'a Pools) -> &'a str {
    if pools.shared.is_empty() || rng.gen_bool(0.5) {
        pick(rng, &pools.majority)
    } else {
        pick(rng, &pools.shared)
    }
}

fn minority_token<'a>(rng: &mut ChaCha8Rng, pools: &'a Pools) -> &'a str {
    if pools.shared.is_empty() || rng.gen_bool(0.5) {
        pick(rng, &pools.minority)
    } else {
        pick(rng, &pools.shared)
    }
}

/// `cued` marks texts that carry minority-cue tokens in `minority_hard` mode.
fn text_for(rng: &mut ChaCha8Rng, pools: &Pools, label: usize, cued: bool, mode: HardnessMode) -> String {
    let len = TEXT_TOKENS;
    let mut tokens: Vec<&str> = Vec::with_capacity(len);
    match mode {
        HardnessMode::Separable => {
            let draw = if label == MINORITY_LABEL { minority_token } else { majority_token };
            tokens.extend((0..len).map(|_| draw(rng, pools)));
        }
        HardnessMode::UniformNoise => {
            let swapped = rng.gen_bool(NOISE_RATE);
            let draw = if (label == MINORITY_LABEL) != swapped {
                minority_token
            } else {
                majority_token
            };
            tokens.extend((0..len).map(|_| draw(rng, pools)));
        }
        HardnessMode::MinorityHard => {
            tokens.extend((0..len).map(|_| majority_token(rng, pools)));
            if cued {
                for slot in tokens.iter_mut().take(HARD_MINORITY_CUES) {
                    *slot = pick(rng, &pools.minority);
                }
                tokens.shuffle(rng);
            }
        }
    }
    tokens.join(" ")
}

/// Build a two-class manifest (`non-sexist` = 0 is the majority, `sexist` = 1 the minority).
///
/// Ids are `fx00000..` regardless of seed; which ids are minority and all texts depend on the seed.
pub fn synthesize_fixture(spec: &FixtureSpec) -> Result<DatasetManifest, CorpusError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pools = Pools::new(
        spec.vocabulary_size,
        spec.hardness_mode != HardnessMode::Separable,
    );
    let n = spec.n_examples;
    let mut labels = vec![MAJORITY_LABEL; n];
    labels
        .iter_mut()
        .take(spec.minority_count())
        .for_each(|l| *l = MINORITY_LABEL);
    labels.shuffle(&mut rng);
    // every minority text is cued, plus a fixed share of majority texts
    let mut cued: Vec<bool> = labels.iter().map(|&l| l == MINORITY_LABEL).collect();
    let mut majority_idx: Vec<usize> = (0..n).filter(|&i| labels[i] == MAJORITY_LABEL).collect();
    majority_idx.shuffle(&mut rng);
    let n_leaked = (majority_idx.len() as f64 * CUE_LEAK_RATE).round() as usize;
    for &i in &majority_idx[..n_leaked] {
        cued[i] = true;
    }

    let examples = labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            Example::new(
                format!("fx{i:05}"),
                text_for(&mut rng, &pools, label, cued[i], spec.hardness_mode),
                label,
            )
            .with_source(format!("fixture-{}", spec.hardness_mode))
        })
        .collect();
    DatasetManifest::new(examples, vec!["non-sexist".into(), "sexist".into()])
}
