use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::Serialize;

use super::{read_log, DynamicsError, RunDynamics};

const SUM_TOLERANCE: f64 = 1e-6;

/// Invariant violations found in a log, counted per kind.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub run_id: String,
    pub n_examples: usize,
    pub n_checkpoints: usize,
    /// Violation kind -> number of offending records.
    pub violations: BTreeMap<String, usize>,
    /// Conditions that disable a score without making the log invalid.
    pub advisories: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn count(&mut self, kind: &str) {
        *self.violations.entry(kind.to_string()).or_default() += 1;
    }
}

/// Check every per-example invariant of an in-memory run without stopping at the first failure.
pub fn validate_run(run: &RunDynamics) -> ValidationReport {
    let mut report = ValidationReport {
        run_id: run.run_id.clone(),
        n_examples: run.examples.len(),
        n_checkpoints: run.n_checkpoints,
        ..ValidationReport::default()
    };
    let mut seen = HashSet::new();
    for view in run.views() {
        let ex = view.example;
        if !seen.insert(ex.example_id.as_str()) {
            report.count("duplicate_id");
        }
        if ex.label >= run.n_classes {
            report.count("label_out_of_range");
        }
        for c in 0..run.n_checkpoints {
            let probs = view.probs_at(c);
            if probs.iter().any(|p| !p.is_finite() || !(0.0..=1.0).contains(p)) {
                report.count("probability_out_of_range");
            }
            let sum: f64 = probs.iter().map(|&p| p as f64).sum();
            if !((sum - 1.0).abs() <= SUM_TOLERANCE) {
                report.count("probability_not_normalized");
            }
            if let Some(g) = view.grad_at(c) {
                if g.iter().any(|x| !x.is_finite()) {
                    report.count("gradient_not_finite");
                }
            }
        }
        if let Some(p) = ex.null_prob {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                report.count("null_probability_out_of_range");
            }
        }
    }
    if run.grad_dim.is_none() {
        report
            .advisories
            .push("VoG unavailable: log has no input-embedding gradients".to_string());
    } else if run.n_checkpoints < 2 {
        report
            .advisories
            .push("VoG degenerate: a single checkpoint gives zero variance".to_string());
    }
    if !run.has_null {
        report
            .advisories
            .push("PVI unavailable: log has no null-model probabilities".to_string());
    }
    report
}

/// Read a `.ddlog` (from this toolkit or an external trainer) and validate it.
///
/// Only an unreadable file (I/O, format, checksum, truncation) is an error.
pub fn validate_external(path: &Path) -> Result<ValidationReport, DynamicsError> {
    Ok(validate_run(&read_log(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::format::{tests::three_example_run, write_log};

    #[test]
    fn valid_log_has_no_violations() {
        let report = validate_run(&three_example_run(true, true));
        assert!(report.is_valid(), "{report:?}");
        assert!(report.advisories.is_empty());
    }

    #[test]
    fn one_bad_sum_is_one_violation() {
        let mut run = three_example_run(true, true);
        run.examples[1].probs[2] = 0.05; // second checkpoint now sums to 0.8
        run.examples[1].probs[3] = 0.75;
        let report = validate_run(&run);
        assert_eq!(report.violations.get("probability_not_normalized"), Some(&1));
        assert_eq!(report.violations.len(), 1);
    }

    #[test]
    fn collects_several_kinds() {
        let mut run = three_example_run(true, true);
        run.examples[0].probs[0] = f32::NAN;
        run.examples[2].example_id = "e0".into();
        run.examples[2].label = 5;
        run.examples[1].grads.as_mut().unwrap()[0] = f32::INFINITY;
        let report = validate_run(&run);
        assert_eq!(report.violations["duplicate_id"], 1);
        assert_eq!(report.violations["label_out_of_range"], 1);
        assert_eq!(report.violations["gradient_not_finite"], 1);
        assert_eq!(report.violations["probability_out_of_range"], 1);
    }

    #[test]
    fn missing_gradients_is_advisory() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.ddlog");
        write_log(&three_example_run(false, false), &path).unwrap();
        let report = validate_external(&path).unwrap();
        assert!(report.is_valid());
        assert!(report.advisories.iter().any(|a| a.starts_with("VoG unavailable")));
        assert!(report.advisories.iter().any(|a| a.starts_with("PVI unavailable")));
    }
}
