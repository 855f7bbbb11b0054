//! Generate imbalanced transactions and split them three ways.

use gbm_ssrf::dataset::{apply_preprocess, fit_preprocess, generate_synthetic, stratified_split, SynthSpec, DEFAULT_RATIOS};

fn main() -> gbm_ssrf::Result<()> {
    for difficulty in [0.0, 0.2, 0.4, 0.8] {
        let spec = SynthSpec { n: 10_000, fraud_rate: 0.01, n_features: 8, difficulty, seed: 1 };
        let ds = generate_synthetic(&spec)?;
        let split = stratified_split(&ds, DEFAULT_RATIOS, 1)?;
        let stats = fit_preprocess(&ds, &split.train)?;
        let scaled = apply_preprocess(&ds, &stats)?;
        let pos: Vec<usize> = (0..ds.n_rows()).filter(|&i| ds.labels()[i] == 1.0).collect();
        let n_neg = (ds.n_rows() - pos.len()) as f64;
        let gap = |c: usize| {
            let p = pos.iter().map(|&i| scaled.value(i, c)).sum::<f64>() / pos.len() as f64;
            let all = (0..ds.n_rows()).map(|i| scaled.value(i, c)).sum::<f64>();
            p - (all - p * pos.len() as f64) / n_neg
        };
        let (col, widest) = (0..ds.n_cols()).map(|c| (c, gap(c))).fold((0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
        println!(
            "difficulty {difficulty:.1}: {} rows, {} positive, split {}/{}/{}, worst stratification error {:.4}, widest class gap {:.2} on x{}",
            ds.n_rows(),
            pos.len(),
            split.train.len(),
            split.valid.len(),
            split.test.len(),
            split.max_stratification_error(ds.labels()),
            widest,
            col,
        );
    }
    Ok(())
}
