//! The GBM-SSRF blend with the forest weight and threshold chosen on validation.

use gbm_ssrf::dataset::{generate_synthetic, stratified_split, SynthSpec, DEFAULT_RATIOS};
use gbm_ssrf::hybrid::{fit_hybrid, merged_importance, HybridConfig, Setting};
use gbm_ssrf::metrics::build_report;

fn main() -> gbm_ssrf::Result<()> {
    let ds = generate_synthetic(&SynthSpec { n: 20_000, fraud_rate: 0.01, n_features: 10, difficulty: 0.4, seed: 13 })?;
    let split = stratified_split(&ds, DEFAULT_RATIOS, 13)?;
    let y: Vec<f64> = split.test.iter().map(|&i| ds.labels()[i]).collect();

    let auto = HybridConfig { seed: 13, ..HybridConfig::default() };
    let settings = [("auto", auto.clone()), ("alpha 0", HybridConfig { alpha: Setting::Fixed(0.0), ..auto.clone() }), (
        "alpha 1",
        HybridConfig { alpha: Setting::Fixed(1.0), ..auto.clone() },
    )];
    for (name, cfg) in settings {
        let model = fit_hybrid(&ds, &split, &cfg)?;
        let s: Vec<f64> = split.test.iter().map(|&i| model.score(ds.row(i))).collect();
        let r = build_report(&y, &s, model.threshold)?;
        println!(
            "{name:<8} alpha {:.2} threshold {:.4}  AUC {:.4}  recall {:.3}",
            model.alpha,
            model.threshold,
            r.auc_roc.unwrap_or(f64::NAN),
            r.recall.unwrap_or(f64::NAN)
        );
        if name == "auto" {
            let imp: Vec<String> = merged_importance(&model).iter().map(|v| format!("{v:.3}")).collect();
            println!("         merged importance {}", imp.join(" "));
        }
    }
    Ok(())
}
