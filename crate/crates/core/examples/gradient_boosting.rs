//! Boosting with both losses, showing the training loss trace.

use gbm_ssrf::dataset::{generate_synthetic, stratified_split, SynthSpec, DEFAULT_RATIOS};
use gbm_ssrf::gbm::{fit_gbm, GbmConfig, Loss};
use gbm_ssrf::metrics::auc_roc;

fn main() -> gbm_ssrf::Result<()> {
    let ds = generate_synthetic(&SynthSpec { n: 20_000, fraud_rate: 0.01, n_features: 10, difficulty: 0.4, seed: 5 })?;
    let split = stratified_split(&ds, DEFAULT_RATIOS, 5)?;
    let y: Vec<f64> = split.test.iter().map(|&i| ds.labels()[i]).collect();

    for loss in [Loss::Squared, Loss::Logistic] {
        let cfg = GbmConfig { loss, n_stages: 200, seed: 5, ..GbmConfig::default() };
        let mut model = fit_gbm(&ds, &split.train, ds.labels(), &cfg)?;
        let t = &model.loss_trace;
        println!("{loss:?}: base score {:.4}", model.base_score);
        for m in [0, 10, 50, 100, 200] {
            println!("  stage {m:>3}  training loss {:.6}", t[m]);
        }
        let s: Vec<f64> = split.test.iter().map(|&i| model.probability(ds.row(i))).collect();
        println!("  test AUC {:.4}", auc_roc(&y, &s)?);

        let best = model.best_prefix(&ds, &split.valid);
        model.truncate(best);
        let s: Vec<f64> = split.test.iter().map(|&i| model.probability(ds.row(i))).collect();
        println!("  truncated to {best} stages by validation loss, test AUC {:.4}", auc_roc(&y, &s)?);
    }
    Ok(())
}
