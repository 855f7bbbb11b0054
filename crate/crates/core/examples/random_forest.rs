//! Plain random forest against the importance-guided variant.

use gbm_ssrf::dataset::{generate_synthetic, stratified_split, SynthSpec, DEFAULT_RATIOS};
use gbm_ssrf::metrics::auc_roc;
use gbm_ssrf::ssrf::{fit_plain_rf, fit_ssrf, SsrfConfig};
use gbm_ssrf::SsrfModel;

fn fmt(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ")
}

fn main() -> gbm_ssrf::Result<()> {
    let ds = generate_synthetic(&SynthSpec { n: 20_000, fraud_rate: 0.01, n_features: 10, difficulty: 0.4, seed: 3 })?;
    let split = stratified_split(&ds, DEFAULT_RATIOS, 3)?;
    let y: Vec<f64> = split.test.iter().map(|&i| ds.labels()[i]).collect();
    let test_auc = |m: &SsrfModel| {
        let s: Vec<f64> = split.test.iter().map(|&i| m.score(ds.row(i))).collect();
        auc_roc(&y, &s)
    };

    let cfg = SsrfConfig { seed: 3, ..SsrfConfig::default() };
    let rf = fit_plain_rf(&ds, &split.train, ds.labels(), &cfg)?;
    println!("plain RF      test AUC {:.4}", test_auc(&rf)?);
    println!("  importance  {}", fmt(&rf.importance));

    for beta in [0.25, 0.5, 1.0] {
        let m = fit_ssrf(&ds, &split.train, ds.labels(), &SsrfConfig { importance_blend: beta, ..cfg.clone() })?;
        println!("SSRF beta {beta:.2} test AUC {:.4}", test_auc(&m)?);
        println!("  pilot       {}", fmt(&m.pilot_importance));
    }
    Ok(())
}
