mod common;

use gbm_ssrf::dataset::{generate_synthetic, SynthSpec};
use gbm_ssrf::gbm::{fit_gbm, init_base_score, negative_gradient, GbmConfig, Loss};
use gbm_ssrf::tree::{Criterion, TreeConfig};
use proptest::prelude::*;

const H: f64 = 1e-5;

fn central_difference(loss: Loss, y: f64, f: f64) -> f64 {
    -(loss.value(y, f + H) - loss.value(y, f - H)) / (2.0 * H)
}

fn total_loss(loss: Loss, ys: &[f64], gamma: f64) -> f64 {
    ys.iter().map(|&y| loss.value(y, gamma)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn gradients_match_finite_differences(y in 0u8..2, yr in -5.0f64..5.0, f in -6.0f64..6.0) {
        let cases = [(Loss::Logistic, y as f64), (Loss::Squared, yr)];
        for (loss, y) in cases {
            let g = negative_gradient(&[y], &[f], loss)[0];
            let fd = central_difference(loss, y, f);
            prop_assert!((g - fd).abs() <= 1e-9 + 1e-6 * g.abs(), "{:?} y={} f={}: {} vs {}", loss, y, f, g, fd);
        }
    }

    #[test]
    fn logistic_base_score_minimizes_total_loss(bits in prop::collection::vec(any::<bool>(), 2..60)) {
        let mut ys: Vec<f64> = bits.iter().map(|&b| b as u8 as f64).collect();
        // a finite minimizer needs both classes
        ys[0] = 1.0;
        ys[1] = 0.0;
        let gamma = init_base_score(&ys, Loss::Logistic);
        let num = common::golden_min(|g| total_loss(Loss::Logistic, &ys, g), -20.0, 20.0);
        prop_assert!((gamma - num).abs() < 1e-6, "{} vs {}", gamma, num);
    }

    #[test]
    fn squared_base_score_is_the_mean(ys in prop::collection::vec(-10.0f64..10.0, 1..40)) {
        let gamma = init_base_score(&ys, Loss::Squared);
        let num = common::golden_min(|g| total_loss(Loss::Squared, &ys, g), -20.0, 20.0);
        prop_assert!((gamma - num).abs() < 1e-6);
    }
}

fn trace(loss: Loss, seed: u64) -> Vec<f64> {
    let ds = generate_synthetic(&SynthSpec { n: 2000, fraud_rate: 0.05, n_features: 6, difficulty: 0.3, seed }).unwrap();
    let rows: Vec<usize> = (0..ds.n_rows()).collect();
    let cfg = GbmConfig {
        n_stages: 100,
        learning_rate: 0.1,
        tree: TreeConfig { max_depth: 3, criterion: Criterion::Mse, ..GbmConfig::default().tree },
        loss,
        ..GbmConfig::default()
    };
    fit_gbm(&ds, &rows, ds.labels(), &cfg).unwrap().loss_trace
}

#[test]
fn squared_trace_never_increases() {
    for seed in 0..3 {
        let t = trace(Loss::Squared, seed);
        assert_eq!(t.len(), 101);
        assert!(t.windows(2).all(|w| w[1] <= w[0]), "seed {seed}: {t:?}");
    }
}

#[test]
fn logistic_trace_strictly_decreases() {
    let t = trace(Loss::Logistic, 0);
    assert!(t.windows(2).all(|w| w[1] < w[0]), "{t:?}");
}

#[test]
fn more_stages_beat_a_single_tree_on_validation() {
    use gbm_ssrf::dataset::{stratified_split, DEFAULT_RATIOS};
    use gbm_ssrf::metrics::auc_roc;
    let ds = generate_synthetic(&SynthSpec { n: 4000, fraud_rate: 0.05, n_features: 6, difficulty: 0.3, seed: 9 }).unwrap();
    let split = stratified_split(&ds, DEFAULT_RATIOS, 9).unwrap();
    let y: Vec<f64> = split.valid.iter().map(|&i| ds.labels()[i]).collect();
    let auc_for = |stages: usize| {
        let cfg = GbmConfig { n_stages: stages, learning_rate: if stages == 1 { 1.0 } else { 0.1 }, ..GbmConfig::default() };
        let m = fit_gbm(&ds, &split.train, ds.labels(), &cfg).unwrap();
        let s: Vec<f64> = split.valid.iter().map(|&i| m.probability(ds.row(i))).collect();
        auc_roc(&y, &s).unwrap()
    };
    let (one, many) = (auc_for(1), auc_for(50));
    assert!(many > one, "{many} vs {one}");
}
