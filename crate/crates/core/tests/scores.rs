mod common;

use datadiet::scores::{el2n, score_runs, vog_raw, El2nPolicy, ScoreConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{oracle_table, random_runs, Nested};

fn log_shape() -> impl Strategy<Value = (u64, usize, usize, usize, usize, usize)> {
    (
        any::<u64>(),
        1usize..=50,
        2usize..=3,
        prop::sample::select(vec![1usize, 2, 5, 10]),
        1usize..=6,
        1usize..=3,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn production_matches_oracle((seed, n, k, n_c, d, runs) in log_shape()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let logs = random_runs(&mut rng, runs, n, k, n_c, d);
        let table = score_runs(&logs, &ScoreConfig::default()).unwrap();
        let expected = oracle_table(&logs);
        for (row, want) in table.rows.iter().zip(&expected) {
            prop_assert!((row.pvi.unwrap() - want.0).abs() <= 1e-9);
            prop_assert!((row.el2n - want.1).abs() <= 1e-9);
            prop_assert!((row.vog_raw.unwrap() - want.2).abs() <= 1e-9);
            prop_assert!((row.vog_norm.unwrap() - want.3).abs() <= 1e-9);
        }
    }

    #[test]
    fn mean_policy_matches_oracle((seed, n, k, n_c, d, _) in log_shape()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let run = random_runs(&mut rng, 1, n, k, n_c, d).remove(0);
        let nested = Nested::from_run(&run);
        for (i, view) in run.views().enumerate() {
            let got = el2n(&view, El2nPolicy::MeanOverCheckpoints).unwrap();
            prop_assert!((got - nested.el2n_mean(i)).abs() <= 1e-9);
        }
    }

    #[test]
    fn bounds_and_pvi_sign((seed, n, k, n_c, d, runs) in log_shape()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let logs = random_runs(&mut rng, runs, n, k, n_c, d);
        for run in &logs {
            let table = score_runs(std::slice::from_ref(run), &ScoreConfig::default()).unwrap();
            for (row, ex) in table.rows.iter().zip(&run.examples) {
                prop_assert!(row.el2n >= 0.0 && row.el2n <= 2f64.sqrt());
                let conditioned = (ex.probs[(run.n_checkpoints - 1) * k + ex.label] as f64).max(1e-12);
                let null = (ex.null_prob.unwrap() as f64).max(1e-12);
                let pvi = row.pvi.unwrap();
                prop_assert_eq!(pvi.partial_cmp(&0.0), conditioned.partial_cmp(&null));
            }
        }
    }

    #[test]
    fn normalized_vog_is_standardized((seed, n, k, n_c, d, runs) in log_shape()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let logs = random_runs(&mut rng, runs, n, k, n_c, d);
        let table = score_runs(&logs, &ScoreConfig::default()).unwrap();
        for label in 0..k {
            let v: Vec<f64> = table.rows.iter().filter(|r| r.label == label).map(|r| r.vog_norm.unwrap()).collect();
            if v.is_empty() || table.meta.degenerate_vog_classes.contains(&label) {
                prop_assert!(v.iter().all(|&z| z == 0.0));
                continue;
            }
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let sd = (v.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
            prop_assert!(mean.abs() <= 1e-6);
            prop_assert!((sd - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn checkpoint_order_does_not_matter_for_vog_or_mean_el2n(
        (seed, n, k, n_c, d, _) in log_shape(),
        shuffle_seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let run = random_runs(&mut rng, 1, n, k, n_c, d).remove(0);
        let mut perm: Vec<usize> = (0..n_c).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
        let mut shuffled = run.clone();
        for ex in &mut shuffled.examples {
            let probs = ex.probs.clone();
            let grads = ex.grads.clone().unwrap();
            ex.probs = perm.iter().flat_map(|&c| probs[c * k..(c + 1) * k].to_vec()).collect();
            ex.grads = Some(perm.iter().flat_map(|&c| grads[c * d..(c + 1) * d].to_vec()).collect());
        }
        for (a, b) in run.views().zip(shuffled.views()) {
            prop_assert!((vog_raw(&a).unwrap() - vog_raw(&b).unwrap()).abs() <= 1e-9);
            let ma = el2n(&a, El2nPolicy::MeanOverCheckpoints).unwrap();
            let mb = el2n(&b, El2nPolicy::MeanOverCheckpoints).unwrap();
            prop_assert!((ma - mb).abs() <= 1e-12);
        }
    }

    #[test]
    fn vog_scales_with_gradients((seed, n, k, n_c, d, _) in log_shape(), scale in 0.125f32..8.0) {
        // powers of two keep the scaled f32 values exact
        let scale = 2f32.powi(scale.log2().round() as i32);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let run = random_runs(&mut rng, 1, n, k, n_c, d).remove(0);
        let mut scaled = run.clone();
        for ex in &mut scaled.examples {
            ex.grads.as_mut().unwrap().iter_mut().for_each(|g| *g *= scale);
        }
        for (a, b) in run.views().zip(scaled.views()) {
            let va = vog_raw(&a).unwrap();
            prop_assert!((vog_raw(&b).unwrap() - scale as f64 * va).abs() <= 1e-9 * (1.0 + va));
        }
        let ta = score_runs(std::slice::from_ref(&run), &ScoreConfig::default()).unwrap();
        let tb = score_runs(std::slice::from_ref(&scaled), &ScoreConfig::default()).unwrap();
        for (a, b) in ta.rows.iter().zip(&tb.rows) {
            prop_assert!((a.vog_norm.unwrap() - b.vog_norm.unwrap()).abs() <= 1e-9);
        }
    }
}

#[test]
fn single_checkpoint_vog_is_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let runs = random_runs(&mut rng, 1, 20, 2, 1, 4);
    let table = score_runs(&runs, &ScoreConfig::default()).unwrap();
    assert!(table.rows.iter().all(|r| r.vog_raw == Some(0.0) && r.vog_norm == Some(0.0)));
    assert_eq!(table.meta.degenerate_vog_classes.len(), 2);
}
