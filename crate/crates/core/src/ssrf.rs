//! Simplified and strengthened random forest.
//!
//! "Simplified" means shallow trees: depth capped at 6 and at least 5 samples
//! per leaf by default. "Strengthened" means the split candidates at each node
//! are drawn with probabilities that mix a uniform distribution with feature
//! importance estimated by a small pilot forest:
//!
//! ```text
//! w_j = (1 - beta) / d + beta * importance_j
//! ```
//!
//! With `beta = 0` the weights are exactly uniform and the forest is a plain
//! random forest; [`fit_plain_rf`] is that baseline and produces the same
//! trees under the same seed.
//!
//! Trees are fitted in parallel on the ambient rayon pool. Every tree's seed is
//! derived up front from `(seed, m)`, so the model does not depend on the
//! number of workers.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed;
use crate::tree::{
    accumulate_importance, build_tree, normalize_importance, Criterion, FeatureSampler,
    TreeConfig, TreeNode,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Mean of tree outputs.
    #[default]
    Average,
    /// Share of trees whose output exceeds 0.5.
    Vote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsrfConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Candidates per split; `None` means `ceil(sqrt(d))`.
    pub features_per_split: Option<usize>,
    pub pilot_trees: usize,
    pub importance_blend: f64,
    pub seed: u64,
    pub bootstrap: bool,
    pub criterion: Criterion,
    pub aggregation: Aggregation,
}

impl Default for SsrfConfig {
    fn default() -> Self {
        SsrfConfig {
            n_trees: 100,
            max_depth: 6,
            min_samples_leaf: 5,
            features_per_split: None,
            pilot_trees: 10,
            importance_blend: 0.5,
            seed: 0,
            bootstrap: true,
            criterion: Criterion::Gini,
            aggregation: Aggregation::Average,
        }
    }
}

impl SsrfConfig {
    pub fn features_per_split(&self, n_features: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
            .max(1)
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::config("n_trees must be at least 1"));
        }
        let k = self.features_per_split(n_features);
        if k > n_features {
            return Err(Error::config(format!(
                "features_per_split {k} exceeds the {n_features} available features"
            )));
        }
        if !(0.0..=1.0).contains(&self.importance_blend) {
            return Err(Error::config(format!(
                "importance_blend must lie in [0, 1], got {}",
                self.importance_blend
            )));
        }
        self.tree_config(FeatureSampler::All).validate()
    }

    fn tree_config(&self, feature_sampler: FeatureSampler) -> TreeConfig {
        TreeConfig {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            criterion: self.criterion,
            feature_sampler,
            ..TreeConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsrfModel {
    pub n_trees: usize,
    pub n_features: usize,
    /// Normalized impurity importance of the fitted forest.
    pub importance: Vec<f64>,
    /// Importance used to weight split candidates (uniform without a pilot).
    pub pilot_importance: Vec<f64>,
    pub trees: Vec<TreeNode>,
    pub config: SsrfConfig,
    /// Row indices each tree was trained on; not persisted.
    #[serde(skip)]
    pub subsets: Vec<Vec<usize>>,
}

impl SsrfModel {
    /// Forest output for one row, unchecked width.
    pub fn score(&self, x: &[f64]) -> f64 {
        let m = self.trees.len() as f64;
        match self.config.aggregation {
            Aggregation::Average => self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / m,
            Aggregation::Vote => {
                self.trees.iter().filter(|t| t.predict(x) > 0.5).count() as f64 / m
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_width(x, self.n_features)?;
        Ok(self.score(x))
    }
}

pub fn predict_ssrf(model: &SsrfModel, x: &[f64]) -> Result<f64> {
    model.predict(x)
}

pub(crate) fn check_width(x: &[f64], n_features: usize) -> Result<()> {
    if x.len() != n_features {
        return Err(Error::data(format!(
            "row has {} features, model expects {n_features}",
            x.len()
        )));
    }
    Ok(())
}

/// `k` distinct features drawn uniformly, sorted ascending.
pub fn uniform_features(n_features: usize, k: usize, rng: &mut seed::Rng) -> Vec<usize> {
    if k >= n_features {
        return (0..n_features).collect();
    }
    let mut picked = rand::seq::index::sample(rng, n_features, k).into_vec();
    picked.sort_unstable();
    picked
}

/// `k` distinct features drawn without replacement with selection weights
/// `(1 - beta) / d + beta * importance[j]`, sorted ascending.
pub fn sample_features(importance: &[f64], k: usize, beta: f64, rng: &mut seed::Rng) -> Vec<usize> {
    let d = importance.len();
    if k >= d {
        return (0..d).collect();
    }
    let uniform = (1.0 - beta) / d as f64;
    let mut weights: Vec<f64> = importance.iter().map(|&p| uniform + beta * p).collect();
    if weights.iter().all(|&w| w == weights[0]) {
        return uniform_features(d, k, rng);
    }
    let mut picked = Vec::with_capacity(k);
    for _ in 0..k {
        let total: f64 = weights.iter().sum();
        let j = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = None;
            for (j, &w) in weights.iter().enumerate() {
                if w > 0.0 {
                    chosen = Some(j);
                    if u < w {
                        break;
                    }
                    u -= w;
                }
            }
            chosen.expect("positive total weight")
        } else {
            // only zero-weight features remain
            let remaining: Vec<usize> = (0..d).filter(|j| !picked.contains(j)).collect();
            remaining[rng.random_range(0..remaining.len())]
        };
        picked.push(j);
        weights[j] = 0.0;
    }
    picked.sort_unstable();
    picked
}

#[allow(clippy::too_many_arguments)]
fn grow_forest(
    ds: &Dataset,
    rows: &[usize],
    targets: &[f64],
    n_trees: usize,
    tree_cfg: &TreeConfig,
    base_seed: u64,
    stream: u64,
    bootstrap: bool,
) -> Result<(Vec<TreeNode>, Vec<Vec<usize>>)> {
    let fitted: Vec<(TreeNode, Vec<usize>)> = (0..n_trees)
        .into_par_iter()
        .map(|m| {
            let tree_seed = seed::derive(base_seed, stream, m as u64);
            let sample = if bootstrap {
                let mut rng = seed::rng(seed::derive(tree_seed, seed::STREAM_BOOTSTRAP, 0));
                (0..rows.len())
                    .map(|_| rows[rng.random_range(0..rows.len())])
                    .collect()
            } else {
                rows.to_vec()
            };
            let split_seed = seed::derive(tree_seed, seed::STREAM_SPLITS, 0);
            let tree = build_tree(&sample, ds, targets, tree_cfg, split_seed)?;
            Ok((tree, sample))
        })
        .collect::<Result<_>>()?;
    Ok(fitted.into_iter().unzip())
}

fn forest_importance(trees: &[TreeNode], n_features: usize) -> Vec<f64> {
    let mut raw = vec![0.0; n_features];
    for t in trees {
        accumulate_importance(t, &mut raw);
    }
    normalize_importance(&raw)
}

fn check_inputs(ds: &Dataset, rows: &[usize], targets: &[f64], cfg: &SsrfConfig) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::data("cannot fit a forest on zero rows"));
    }
    if targets.len() != ds.n_rows() {
        return Err(Error::data(format!(
            "{} targets for a dataset of {} rows",
            targets.len(),
            ds.n_rows()
        )));
    }
    cfg.validate(ds.n_cols())
}

/// Importance estimated by `pilot_trees` uniformly-sampled trees.
pub fn fit_pilot_importance(
    ds: &Dataset,
    rows: &[usize],
    targets: &[f64],
    cfg: &SsrfConfig,
) -> Result<Vec<f64>> {
    check_inputs(ds, rows, targets, cfg)?;
    let d = ds.n_cols();
    if cfg.pilot_trees == 0 {
        return Ok(vec![1.0 / d as f64; d]);
    }
    let tree_cfg = cfg.tree_config(FeatureSampler::Uniform {
        k: cfg.features_per_split(d),
    });
    let (trees, _) = grow_forest(
        ds,
        rows,
        targets,
        cfg.pilot_trees,
        &tree_cfg,
        cfg.seed,
        seed::STREAM_PILOT,
        cfg.bootstrap,
    )?;
    Ok(forest_importance(&trees, d))
}

/// Plain random forest: bootstrap rows, uniform feature candidates.
/// Ignores `pilot_trees` and `importance_blend`.
pub fn fit_plain_rf(
    ds: &Dataset,
    rows: &[usize],
    targets: &[f64],
    cfg: &SsrfConfig,
) -> Result<SsrfModel> {
    check_inputs(ds, rows, targets, cfg)?;
    let d = ds.n_cols();
    let tree_cfg = cfg.tree_config(FeatureSampler::Uniform {
        k: cfg.features_per_split(d),
    });
    let (trees, subsets) = grow_forest(
        ds,
        rows,
        targets,
        cfg.n_trees,
        &tree_cfg,
        cfg.seed,
        seed::STREAM_FOREST,
        cfg.bootstrap,
    )?;
    Ok(SsrfModel {
        n_trees: trees.len(),
        n_features: d,
        importance: forest_importance(&trees, d),
        pilot_importance: vec![1.0 / d as f64; d],
        trees,
        config: cfg.clone(),
        subsets,
    })
}

/// Pilot importance first, then `n_trees` importance-guided trees.
pub fn fit_ssrf(ds: &Dataset, rows: &[usize], targets: &[f64], cfg: &SsrfConfig) -> Result<SsrfModel> {
    let pilot = fit_pilot_importance(ds, rows, targets, cfg)?;
    fit_ssrf_with_importance(ds, rows, targets, cfg, pilot)
}

/// Main forest only, with split-candidate weights from a precomputed
/// importance vector.
pub fn fit_ssrf_with_importance(
    ds: &Dataset,
    rows: &[usize],
    targets: &[f64],
    cfg: &SsrfConfig,
    pilot_importance: Vec<f64>,
) -> Result<SsrfModel> {
    check_inputs(ds, rows, targets, cfg)?;
    let d = ds.n_cols();
    if pilot_importance.len() != d {
        return Err(Error::data("importance vector length differs from feature count"));
    }
    let tree_cfg = cfg.tree_config(FeatureSampler::Weighted {
        k: cfg.features_per_split(d),
        importance: pilot_importance.clone(),
        beta: cfg.importance_blend,
    });
    let (trees, subsets) = grow_forest(
        ds,
        rows,
        targets,
        cfg.n_trees,
        &tree_cfg,
        cfg.seed,
        seed::STREAM_FOREST,
        cfg.bootstrap,
    )?;
    Ok(SsrfModel {
        n_trees: trees.len(),
        n_features: d,
        importance: forest_importance(&trees, d),
        pilot_importance,
        trees,
        config: cfg.clone(),
        subsets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SynthSpec};
    use crate::tree::UNLIMITED_DEPTH;

    fn toy() -> Dataset {
        let ds = generate_synthetic(&SynthSpec {
            n: 400,
            fraud_rate: 0.1,
            n_features: 6,
            difficulty: 0.3,
            seed: 2,
        })
        .unwrap();
        ds
    }

    #[test]
    fn pilot_bypass_and_constant_features() {
        let ds = toy();
        let rows: Vec<usize> = (0..ds.n_rows()).collect();
        let cfg = SsrfConfig {
            pilot_trees: 0,
            ..SsrfConfig::default()
        };
        let imp = fit_pilot_importance(&ds, &rows, ds.labels(), &cfg).unwrap();
        assert_eq!(imp, vec![1.0 / 6.0; 6]);

        let flat = Dataset::new(vec![1.0; 40], (0..20).map(|i| (i % 2) as f64).collect(), vec!["a".into(), "b".into()])
            .unwrap();
        let rows: Vec<usize> = (0..20).collect();
        let imp = fit_pilot_importance(&flat, &rows, flat.labels(), &SsrfConfig::default()).unwrap();
        assert_eq!(imp, vec![0.5, 0.5]);
    }

    #[test]
    fn pilot_finds_the_informative_feature() {
        // only column 3 carries signal; others are hashed noise
        let n = 300;
        let mut feats = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let y = (i % 5 == 0) as u8 as f64;
            for j in 0..5 {
                let noise = ((i * 31 + j * 17) % 97) as f64 / 97.0;
                feats.push(if j == 3 { y + 0.3 * noise } else { noise });
            }
            labels.push(y);
        }
        let ds = Dataset::new(feats, labels, (0..5).map(|j| format!("c{j}")).collect()).unwrap();
        let rows: Vec<usize> = (0..n).collect();
        let imp = fit_pilot_importance(&ds, &rows, ds.labels(), &SsrfConfig::default()).unwrap();
        let argmax = (0..5).max_by(|&a, &b| imp[a].total_cmp(&imp[b])).unwrap();
        assert_eq!(argmax, 3, "{imp:?}");
        assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_feature_draws() {
        let mut rng = seed::rng(1);
        let imp = [1.0, 0.0, 0.0, 0.0];
        for _ in 0..100 {
            assert_eq!(sample_features(&imp, 1, 1.0, &mut rng), vec![0]);
        }
        assert_eq!(sample_features(&[0.1, 0.2, 0.7], 3, 0.3, &mut rng), vec![0, 1, 2]);
        // beta = 1 with fewer nonzero weights than k
        let picked = sample_features(&imp, 3, 1.0, &mut rng);
        assert_eq!(picked.len(), 3);
        assert!(picked.contains(&0));
    }

    #[test]
    fn uniform_draw_frequencies() {
        // each feature appears with probability k/d per draw
        let (d, k, draws) = (7usize, 3usize, 100_000usize);
        let mut rng = seed::rng(99);
        let imp = [0.5, 0.2, 0.1, 0.1, 0.05, 0.05, 0.0];
        let mut counts = vec![0usize; d];
        for _ in 0..draws {
            let s = sample_features(&imp, k, 0.0, &mut rng);
            assert_eq!(s.len(), k);
            for j in s {
                counts[j] += 1;
            }
        }
        let p = k as f64 / d as f64;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - draws as f64 * p).abs() < 3.0 * sigma, "{c}");
        }
    }

    #[test]
    fn single_unbagged_deep_tree_memorizes() {
        let ds = toy();
        let rows: Vec<usize> = (0..ds.n_rows()).collect();
        let cfg = SsrfConfig {
            n_trees: 1,
            max_depth: UNLIMITED_DEPTH,
            min_samples_leaf: 1,
            bootstrap: false,
            features_per_split: Some(6),
            ..SsrfConfig::default()
        };
        let m = fit_ssrf(&ds, &rows, ds.labels(), &cfg).unwrap();
        let correct = rows
            .iter()
            .filter(|&&i| (m.score(ds.row(i)) > 0.5) == (ds.labels()[i] == 1.0))
            .count();
        assert_eq!(correct, rows.len());
    }

    #[test]
    fn fixed_seed_is_reproducible_and_depth_capped() {
        let ds = toy();
        let rows: Vec<usize> = (0..ds.n_rows()).collect();
        let cfg = SsrfConfig {
            n_trees: 12,
            seed: 5,
            ..SsrfConfig::default()
        };
        let a = fit_ssrf(&ds, &rows, ds.labels(), &cfg).unwrap();
        let b = fit_ssrf(&ds, &rows, ds.labels(), &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.trees.iter().all(|t| t.depth() <= 6));
        assert!((a.importance.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(a.subsets.len(), 12);
        assert!(a.subsets.iter().all(|s| s.len() == rows.len()));
    }

    #[test]
    fn mean_and_vote_aggregation() {
        let leaves = [0.2, 0.4, 0.9];
        let mut m = SsrfModel {
            n_trees: 3,
            n_features: 1,
            importance: vec![1.0],
            pilot_importance: vec![1.0],
            trees: leaves.iter().map(|&v| TreeNode::Leaf(v)).collect(),
            config: SsrfConfig::default(),
            subsets: vec![],
        };
        assert!((m.predict(&[0.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(m.predict(&[0.0, 1.0]).is_err());
        m.config.aggregation = Aggregation::Vote;
        assert!((m.score(&[0.0]) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_configs() {
        let ds = toy();
        let rows: Vec<usize> = (0..10).collect();
        let too_many = SsrfConfig {
            features_per_split: Some(7),
            ..SsrfConfig::default()
        };
        assert!(fit_ssrf(&ds, &rows, ds.labels(), &too_many).is_err());
        let no_trees = SsrfConfig {
            n_trees: 0,
            ..SsrfConfig::default()
        };
        assert!(fit_ssrf(&ds, &rows, ds.labels(), &no_trees).is_err());
        assert!(fit_ssrf(&ds, &[], ds.labels(), &SsrfConfig::default()).is_err());
    }
}
