//! Run configuration files (TOML). Command-line flags override file values.

use std::fs;
use std::path::{Path, PathBuf};

use datadiet::trainer::{Activation, Schedule, TrainerConfig};
use serde::Deserialize;

use crate::error::CliError;

/// Trainer settings; every key is optional and falls back to the default.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerSection {
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub schedule: Option<Schedule>,
    pub embedding_dim: Option<usize>,
    pub hidden_dim: Option<usize>,
    pub vocab_cap: Option<usize>,
    pub activation: Option<Activation>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub eps: Option<f64>,
    pub weight_decay: Option<f64>,
}

impl TrainerSection {
    pub fn apply(&self, base: TrainerConfig) -> TrainerConfig {
        let mut c = base;
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { c.$field = v; } )* };
        }
        set!(learning_rate, epochs, batch_size, schedule, embedding_dim, hidden_dim, vocab_cap, activation);
        macro_rules! set_opt {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { c.optimizer.$field = v; } )* };
        }
        set_opt!(beta1, beta2, eps, weight_decay);
        c
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub jobs: Option<usize>,
    /// Percent values.
    pub rates: Option<Vec<f64>>,
    pub scores: Option<Vec<String>>,
    pub directions: Option<Vec<String>>,
    pub stratified: Option<bool>,
    pub el2n_policy: Option<String>,
    pub manifest: Option<PathBuf>,
    pub fixture: Option<String>,
    pub fixture_n: Option<usize>,
    pub fixture_seed: Option<u64>,
    /// `name=path` entries.
    pub eval: Option<Vec<String>>,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub trainer: TrainerSection,
}

impl RunConfigFile {
    /// Parse `path`; relative paths inside are taken relative to its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::data("io", format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfigFile =
            toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.manifest.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.output.as_mut() {
            rebase(p);
        }
        if let Some(entries) = cfg.eval.as_mut() {
            for e in entries.iter_mut() {
                if let Some((name, p)) = e.split_once('=') {
                    let p = Path::new(p);
                    if p.is_relative() {
                        *e = format!("{name}={}", base.join(p).display());
                    }
                }
            }
        }
        Ok(cfg)
    }

    pub fn load_opt(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }
}

/// Parse one `name=path` evaluation-set argument.
pub fn parse_eval_arg(arg: &str) -> Result<(String, PathBuf), CliError> {
    match arg.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), PathBuf::from(path))),
        _ => Err(CliError::usage(format!("--eval expects NAME=PATH, got {arg:?}"))),
    }
}

/// Percent list to fractions, rejecting anything outside `[0, 100)`.
pub fn rates_from_percents(percents: &[f64]) -> Result<Vec<f64>, CliError> {
    percents
        .iter()
        .map(|&p| {
            if (0.0..100.0).contains(&p) {
                Ok(p / 100.0)
            } else {
                Err(CliError::usage(format!("rate {p}% is outside [0, 100)")))
            }
        })
        .collect()
}
