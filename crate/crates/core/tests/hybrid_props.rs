mod common;

use gbm_ssrf::dataset::{generate_synthetic, stratified_split, SynthSpec, DEFAULT_RATIOS};
use gbm_ssrf::gbm::{fit_gbm, sigmoid, GbmConfig};
use gbm_ssrf::hybrid::{fit_embedded, fit_hybrid, GbmPart, HybridConfig, HybridMode, Setting};
use gbm_ssrf::ssrf::{fit_plain_rf, fit_ssrf, SsrfConfig};
use gbm_ssrf::{Dataset, HybridModel, SplitAssignment};
use proptest::prelude::*;
use std::sync::OnceLock;

fn data() -> &'static (Dataset, SplitAssignment) {
    static D: OnceLock<(Dataset, SplitAssignment)> = OnceLock::new();
    D.get_or_init(|| {
        let ds = generate_synthetic(&SynthSpec { n: 1500, fraud_rate: 0.05, n_features: 5, difficulty: 0.4, seed: 3 })
            .unwrap();
        let split = stratified_split(&ds, DEFAULT_RATIOS, 3).unwrap();
        (ds, split)
    })
}

fn small_cfg() -> HybridConfig {
    let mut cfg = HybridConfig { seed: 11, ..HybridConfig::default() };
    cfg.gbm.n_stages = 20;
    cfg.ssrf.n_trees = 15;
    cfg
}

fn blended() -> &'static HybridModel {
    static M: OnceLock<HybridModel> = OnceLock::new();
    M.get_or_init(|| {
        let (ds, split) = data();
        fit_hybrid(ds, split, &small_cfg()).unwrap()
    })
}

fn with_alpha(alpha: f64) -> HybridModel {
    HybridModel { alpha, ..blended().clone() }
}

fn row() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-4.0f64..4.0, 5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn blend_expands_term_by_term(x in row(), alpha in 0.0f64..=1.0) {
        let m = with_alpha(alpha);
        let GbmPart::Plain(g) = &m.gbm else { unreachable!() };
        let forest = m.ssrf.as_ref().unwrap();
        let mut f = g.base_score;
        for t in &g.stages {
            f += g.learning_rate * t.predict(&x);
        }
        let mut p = (1.0 - alpha) * sigmoid(f);
        for t in &forest.trees {
            p += m.tree_weight() * t.predict(&x);
        }
        prop_assert!((m.predict(&x).unwrap() - p).abs() < 1e-12);
    }

    #[test]
    fn blend_is_a_probability_and_moves_monotonically_with_alpha(x in row()) {
        let ps: Vec<f64> = (0..=10).map(|i| with_alpha(i as f64 / 10.0).predict(&x).unwrap()).collect();
        prop_assert!(ps.iter().all(|p| (0.0..=1.0).contains(p)));
        let up = ps.windows(2).all(|w| w[1] >= w[0] - 1e-15);
        let down = ps.windows(2).all(|w| w[1] <= w[0] + 1e-15);
        prop_assert!(up || down, "{:?}", ps);
    }

    #[test]
    fn extreme_alphas_reproduce_members(x in row()) {
        let gbm = with_alpha(0.0);
        let GbmPart::Plain(g) = &gbm.gbm else { unreachable!() };
        prop_assert!((gbm.predict(&x).unwrap() - g.probability(&x)).abs() <= 1e-12);
        let forest = with_alpha(1.0);
        let s = forest.ssrf.as_ref().unwrap().score(&x);
        prop_assert!((forest.predict(&x).unwrap() - s).abs() <= 1e-12);
    }
}

#[test]
fn members_match_standalone_fits() {
    let (ds, split) = data();
    let cfg = small_cfg();
    let m = blended();
    let g = fit_gbm(ds, &split.train, ds.labels(), &GbmConfig { seed: cfg.seed, ..cfg.gbm.clone() }).unwrap();
    let s = fit_ssrf(ds, &split.train, ds.labels(), &SsrfConfig { seed: cfg.seed, ..cfg.ssrf.clone() }).unwrap();
    assert_eq!(m.gbm, GbmPart::Plain(g));
    assert_eq!(m.ssrf.as_ref().unwrap().trees, s.trees);
}

#[test]
fn unweighted_ssrf_is_the_plain_forest() {
    let (ds, split) = data();
    let cfg = SsrfConfig { importance_blend: 0.0, pilot_trees: 0, n_trees: 25, seed: 5, ..SsrfConfig::default() };
    let a = fit_ssrf(ds, &split.train, ds.labels(), &cfg).unwrap();
    let b = fit_plain_rf(ds, &split.train, ds.labels(), &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn single_tree_stages_reduce_to_plain_boosting() {
    let (ds, split) = data();
    let mut cfg = small_cfg();
    cfg.mode = HybridMode::Embedded;
    cfg.stage_forest_size = 1;
    cfg.ssrf.bootstrap = false;
    cfg.ssrf.features_per_split = Some(ds.n_cols());
    cfg.ssrf.max_depth = cfg.gbm.tree.max_depth;
    cfg.ssrf.min_samples_leaf = cfg.gbm.tree.min_samples_leaf;
    let emb = fit_embedded(ds, &split.train, &cfg).unwrap();
    let plain = fit_gbm(ds, &split.train, ds.labels(), &GbmConfig { seed: cfg.seed, ..cfg.gbm.clone() }).unwrap();
    assert_eq!(emb.stages.len(), plain.stages.len());
    for (f, t) in emb.stages.iter().zip(&plain.stages) {
        assert_eq!(&f.trees[0], t);
    }
    assert_eq!(emb.loss_trace, plain.loss_trace);
    for i in 0..ds.n_rows() {
        assert_eq!(emb.probability(ds.row(i)).to_bits(), plain.probability(ds.row(i)).to_bits());
    }
}

#[test]
fn fixed_settings_are_honoured() {
    let (ds, split) = data();
    let mut cfg = small_cfg();
    cfg.alpha = Setting::Fixed(0.3);
    cfg.threshold = Setting::Fixed(0.2);
    let m = fit_hybrid(ds, split, &cfg).unwrap();
    assert_eq!((m.alpha, m.threshold), (0.3, 0.2));
    cfg.alpha = Setting::Fixed(1.5);
    assert!(fit_hybrid(ds, split, &cfg).is_err());
}

#[test]
fn embedded_mode_has_no_separate_forest() {
    let (ds, split) = data();
    let mut cfg = small_cfg();
    cfg.mode = HybridMode::Embedded;
    cfg.gbm.n_stages = 5;
    let m = fit_hybrid(ds, split, &cfg).unwrap();
    assert!(m.ssrf.is_none());
    assert_eq!(m.alpha, 0.0);
    let GbmPart::Embedded(e) = &m.gbm else { panic!() };
    assert!(e.stages.iter().all(|s| s.trees.len() == cfg.stage_forest_size));
    let total: f64 = m.importance.iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
}
