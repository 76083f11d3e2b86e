//! Random training-dynamics logs and a naive score oracle.
//!
//! The oracle works on nested vectors copied out of a run and evaluates each
//! score formula literally, with no shared code paths with the library.
#![allow(dead_code)]

use datadiet::dynamics::{ExampleDynamics, RunDynamics};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const FLOOR: f64 = 1e-12;

/// `[example][checkpoint][class]` probabilities etc., all widened from the stored f32.
pub struct Nested {
    pub labels: Vec<usize>,
    pub probs: Vec<Vec<Vec<f64>>>,
    pub grads: Vec<Vec<Vec<f64>>>,
    pub null: Vec<f64>,
}

impl Nested {
    pub fn from_run(run: &RunDynamics) -> Self {
        let k = run.n_classes;
        let n_c = run.n_checkpoints;
        let mut out = Nested {
            labels: vec![],
            probs: vec![],
            grads: vec![],
            null: vec![],
        };
        for ex in &run.examples {
            out.labels.push(ex.label);
            out.probs.push(
                (0..n_c)
                    .map(|c| (0..k).map(|j| ex.probs[c * k + j] as f64).collect())
                    .collect(),
            );
            if let (Some(g), Some(d)) = (&ex.grads, run.grad_dim) {
                out.grads.push(
                    (0..n_c)
                        .map(|c| (0..d).map(|e| g[c * d + e] as f64).collect())
                        .collect(),
                );
            }
            out.null.push(ex.null_prob.map_or(f64::NAN, |p| p as f64));
        }
        out
    }

    pub fn pvi(&self, i: usize) -> f64 {
        let y = self.labels[i];
        let last = self.probs[i].len() - 1;
        let g_null = self.null[i].max(FLOOR);
        let g_x = self.probs[i][last][y].max(FLOOR);
        -g_null.log2() + g_x.log2()
    }

    pub fn el2n_at(&self, i: usize, c: usize) -> f64 {
        let y = self.labels[i];
        let mut s = 0.0;
        for (j, p) in self.probs[i][c].iter().enumerate() {
            let target = if j == y { 1.0 } else { 0.0 };
            s += (p - target) * (p - target);
        }
        s.sqrt()
    }

    pub fn el2n_final(&self, i: usize) -> f64 {
        self.el2n_at(i, self.probs[i].len() - 1)
    }

    pub fn el2n_mean(&self, i: usize) -> f64 {
        let n_c = self.probs[i].len();
        (0..n_c).map(|c| self.el2n_at(i, c)).sum::<f64>() / n_c as f64
    }

    pub fn vog(&self, i: usize) -> f64 {
        let g = &self.grads[i];
        let n_c = g.len() as f64;
        let d = g[0].len();
        let mut total = 0.0;
        for e in 0..d {
            let mut mu = 0.0;
            for row in g {
                mu += row[e];
            }
            mu /= n_c;
            let mut ss = 0.0;
            for row in g {
                ss += (row[e] - mu) * (row[e] - mu);
            }
            total += (ss / n_c).sqrt();
        }
        total / d as f64
    }
}

/// Per-class z-scores with population statistics; constant classes map to 0.
pub fn normalize(values: &[f64], labels: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    let max_label = labels.iter().copied().max().unwrap_or(0);
    for k in 0..=max_label {
        let idx: Vec<usize> = (0..values.len()).filter(|&i| labels[i] == k).collect();
        if idx.is_empty() {
            continue;
        }
        let n = idx.len() as f64;
        let mu = idx.iter().map(|&i| values[i]).sum::<f64>() / n;
        let sd = (idx.iter().map(|&i| (values[i] - mu).powi(2)).sum::<f64>() / n).sqrt();
        if idx.iter().all(|&i| values[i] == values[idx[0]]) {
            continue;
        }
        for &i in &idx {
            out[i] = (values[i] - mu) / sd;
        }
    }
    out
}

fn random_probs(rng: &mut ChaCha8Rng, k: usize) -> Vec<f32> {
    // occasionally a hard zero, to exercise the log floor
    if rng.gen_bool(0.03) {
        let hot = rng.gen_range(0..k);
        return (0..k).map(|j| if j == hot { 1.0 } else { 0.0 }).collect();
    }
    let logits: Vec<f64> = (0..k).map(|_| rng.gen_range(-6.0..6.0)).collect();
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| (x / s) as f32).collect()
}

/// A random run with `n` examples, `k` classes, `n_c` checkpoints and `d`-dim gradients.
pub fn random_run(rng: &mut ChaCha8Rng, n: usize, k: usize, n_c: usize, d: usize, seed: u64) -> RunDynamics {
    let priors = random_probs(rng, k);
    let examples = (0..n)
        .map(|i| {
            let label = rng.gen_range(0..k);
            let probs = (0..n_c).flat_map(|_| random_probs(rng, k)).collect();
            let grads = (0..n_c * d).map(|_| rng.gen_range(-2.0f32..2.0)).collect();
            ExampleDynamics {
                example_id: format!("r{i:03}"),
                label,
                probs,
                grads: Some(grads),
                null_prob: Some(priors[label]),
            }
        })
        .collect();
    RunDynamics {
        run_id: format!("seed-{seed}"),
        seed,
        n_checkpoints: n_c,
        n_classes: k,
        grad_dim: Some(d),
        has_null: true,
        examples,
        provenance: None,
    }
}

/// `runs` runs over the same examples and labels, each with fresh dynamics.
pub fn random_runs(rng: &mut ChaCha8Rng, runs: usize, n: usize, k: usize, n_c: usize, d: usize) -> Vec<RunDynamics> {
    let first = random_run(rng, n, k, n_c, d, 0);
    let mut out = vec![first.clone()];
    for r in 1..runs {
        let mut run = first.clone();
        run.seed = r as u64;
        run.run_id = format!("seed-{r}");
        for ex in &mut run.examples {
            ex.probs = (0..n_c).flat_map(|_| random_probs(rng, k)).collect();
            ex.grads = Some((0..n_c * d).map(|_| rng.gen_range(-2.0f32..2.0)).collect());
        }
        out.push(run);
    }
    out
}

/// Oracle scores averaged over runs: `(pvi, el2n_final, vog_raw, vog_norm)` per example.
pub fn oracle_table(runs: &[RunDynamics]) -> Vec<(f64, f64, f64, f64)> {
    let nested: Vec<Nested> = runs.iter().map(Nested::from_run).collect();
    let n = nested[0].labels.len();
    let r = runs.len() as f64;
    let mut rows: Vec<(f64, f64, f64, f64)> = (0..n)
        .map(|i| {
            let mut acc = (0.0, 0.0, 0.0, 0.0);
            for t in &nested {
                acc.0 += t.pvi(i);
                acc.1 += t.el2n_final(i);
                acc.2 += t.vog(i);
            }
            (acc.0 / r, acc.1 / r, acc.2 / r, 0.0)
        })
        .collect();
    let raw: Vec<f64> = rows.iter().map(|x| x.2).collect();
    for (row, z) in rows.iter_mut().zip(normalize(&raw, &nested[0].labels)) {
        row.3 = z;
    }
    rows
}
