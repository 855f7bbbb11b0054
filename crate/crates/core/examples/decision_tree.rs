//! Grow a single CART tree and inspect it.

use gbm_ssrf::dataset::{generate_synthetic, SynthSpec};
use gbm_ssrf::metrics::auc_roc;
use gbm_ssrf::tree::{accumulate_importance, build_tree, normalize_importance, Criterion, TreeConfig};

fn main() -> gbm_ssrf::Result<()> {
    let ds = generate_synthetic(&SynthSpec { n: 4000, fraud_rate: 0.05, n_features: 5, difficulty: 0.3, seed: 7 })?;
    let rows: Vec<usize> = (0..ds.n_rows()).collect();
    for criterion in [Criterion::Gini, Criterion::Mse] {
        for max_depth in [1, 3, 6] {
            let cfg = TreeConfig { max_depth, criterion, min_samples_leaf: 5, ..TreeConfig::default() };
            let tree = build_tree(&rows, &ds, ds.labels(), &cfg, 0)?;
            let scores: Vec<f64> = rows.iter().map(|&i| tree.predict(ds.row(i))).collect();
            let mut raw = vec![0.0; ds.n_cols()];
            accumulate_importance(&tree, &mut raw);
            let imp: Vec<String> = normalize_importance(&raw).iter().map(|v| format!("{v:.2}")).collect();
            println!(
                "{criterion:?} depth<={max_depth}: depth {}, {} leaves, train AUC {:.4}, importance [{}]",
                tree.depth(),
                tree.n_leaves(),
                auc_roc(ds.labels(), &scores)?,
                imp.join(", ")
            );
        }
    }
    let stump = build_tree(&rows, &ds, ds.labels(), &TreeConfig { max_depth: 1, ..TreeConfig::default() }, 0)?;
    println!("{}", serde_json::to_string_pretty(&stump).unwrap());
    Ok(())
}
