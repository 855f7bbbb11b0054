//! CART binary trees: exhaustive midpoint split search, greedy recursive
//! growth, prediction and impurity-gain importance.
//!
//! Targets are passed as a slice aligned with the dataset's rows; `rows`
//! selects which of them (possibly repeated, for bootstrap samples) a tree
//! sees.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed;

/// Sentinel for "no depth cap".
pub const UNLIMITED_DEPTH: usize = usize::MAX;

/// Relative gain margin below which two candidate splits count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Gini impurity over binary targets.
    Gini,
    /// Variance reduction.
    Mse,
}

/// Source of split candidates at each node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSampler {
    /// Every feature at every node.
    All,
    /// `k` features drawn uniformly without replacement per node.
    Uniform { k: usize },
    /// `k` features drawn with weights `(1 - beta) / d + beta * importance[j]`.
    Weighted {
        k: usize,
        importance: Vec<f64>,
        beta: f64,
    },
}

impl FeatureSampler {
    /// Candidate features for one node, sorted ascending.
    pub fn draw(&self, n_features: usize, rng: &mut seed::Rng) -> Vec<usize> {
        match self {
            FeatureSampler::All => (0..n_features).collect(),
            FeatureSampler::Uniform { k } => crate::ssrf::uniform_features(n_features, *k, rng),
            FeatureSampler::Weighted {
                k,
                importance,
                beta,
            } => crate::ssrf::sample_features(importance, *k, *beta, rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub criterion: Criterion,
    pub feature_sampler: FeatureSampler,
    pub min_gain: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 6,
            min_samples_leaf: 1,
            criterion: Criterion::Gini,
            feature_sampler: FeatureSampler::All,
            min_gain: 1e-7,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::config("max_depth must be at least 1"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::config("min_samples_leaf must be at least 1"));
        }
        if !(self.min_gain >= 0.0) {
            return Err(Error::config("min_gain must be nonnegative"));
        }
        match &self.feature_sampler {
            FeatureSampler::Uniform { k } | FeatureSampler::Weighted { k, .. } if *k == 0 => {
                Err(Error::config("features per split must be at least 1"))
            }
            FeatureSampler::Weighted { beta, .. } if !(0.0..=1.0).contains(beta) => {
                Err(Error::config("importance blend must lie in [0, 1]"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
    pub left_count: usize,
    pub right_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitNode {
    #[serde(rename = "f")]
    pub feature: usize,
    #[serde(rename = "t")]
    pub threshold: f64,
    /// Impurity decrease of this split, per sample reaching the node.
    #[serde(rename = "g", default)]
    pub gain: f64,
    /// Training samples (with multiplicity) that reached the node.
    #[serde(rename = "n", default)]
    pub n_samples: usize,
    #[serde(rename = "l")]
    pub left: Box<TreeNode>,
    #[serde(rename = "r")]
    pub right: Box<TreeNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeNode {
    Split(SplitNode),
    Leaf(f64),
}

impl TreeNode {
    /// Routes `x` to a leaf: `x[feature] <= threshold` goes left.
    ///
    /// Panics if `x` is shorter than [`TreeNode::required_width`].
    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf(v) => return *v,
                TreeNode::Split(s) => {
                    node = if x[s.feature] <= s.threshold {
                        &s.left
                    } else {
                        &s.right
                    };
                }
            }
        }
    }

    /// Minimum row width this tree can route.
    pub fn required_width(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 0,
            TreeNode::Split(s) => (s.feature + 1)
                .max(s.left.required_width())
                .max(s.right.required_width()),
        }
    }

    /// Number of split levels on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 0,
            TreeNode::Split(s) => 1 + s.left.depth().max(s.right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 1,
            TreeNode::Split(s) => s.left.n_leaves() + s.right.n_leaves(),
        }
    }

    pub fn leaf_values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<f64>) {
        match self {
            TreeNode::Leaf(v) => out.push(*v),
            TreeNode::Split(s) => {
                s.left.collect_leaves(out);
                s.right.collect_leaves(out);
            }
        }
    }
}

pub fn predict_tree(node: &TreeNode, x: &[f64]) -> Result<f64> {
    let need = node.required_width();
    if x.len() < need {
        return Err(Error::data(format!(
            "row has {} features but the tree references index {}",
            x.len(),
            need - 1
        )));
    }
    Ok(node.predict(x))
}

fn gini(sum: f64, n: f64) -> f64 {
    let p = sum / n;
    2.0 * p * (1.0 - p)
}

/// Impurity decrease from splitting a node into the two given halves.
fn split_gain(criterion: Criterion, sum_l: f64, n_l: usize, sum_r: f64, n_r: usize) -> f64 {
    let (nl, nr) = (n_l as f64, n_r as f64);
    let n = nl + nr;
    let sum = sum_l + sum_r;
    match criterion {
        Criterion::Gini => gini(sum, n) - (nl / n) * gini(sum_l, nl) - (nr / n) * gini(sum_r, nr),
        Criterion::Mse => (sum_l * sum_l / nl + sum_r * sum_r / nr - sum * sum / n) / n,
    }
}

/// Exhaustive search over midpoints between consecutive distinct values of
/// each candidate feature. Returns `None` when no split clears `min_gain`
/// with both children holding at least `min_samples_leaf` rows. Ties go to
/// the lowest feature index, then the lowest threshold.
pub fn best_split(
    rows: &[usize],
    ds: &Dataset,
    targets: &[f64],
    candidate_features: &[usize],
    cfg: &TreeConfig,
) -> Option<SplitCandidate> {
    let n = rows.len();
    let msl = cfg.min_samples_leaf.max(1);
    if n < 2 * msl {
        return None;
    }
    let total: f64 = rows.iter().map(|&r| targets[r]).sum();
    let mut features = candidate_features.to_vec();
    features.sort_unstable();
    features.dedup();

    let mut best: Option<SplitCandidate> = None;
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
    for f in features {
        pairs.clear();
        pairs.extend(rows.iter().map(|&r| (ds.value(r, f), targets[r])));
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        if pairs[0].0 == pairs[n - 1].0 {
            continue;
        }
        let mut sum_l = 0.0;
        for i in 0..n - 1 {
            sum_l += pairs[i].1;
            let (lo, hi) = (pairs[i].0, pairs[i + 1].0);
            if lo == hi {
                continue;
            }
            let n_l = i + 1;
            let n_r = n - n_l;
            if n_l < msl {
                continue;
            }
            if n_r < msl {
                break;
            }
            let gain = split_gain(cfg.criterion, sum_l, n_l, total - sum_l, n_r);
            if !(gain > cfg.min_gain) {
                continue;
            }
            let better = match &best {
                None => true,
                Some(b) => gain > b.gain + TIE_TOLERANCE * b.gain,
            };
            if better {
                let mut threshold = 0.5 * lo + 0.5 * hi;
                if !(threshold >= lo && threshold < hi) {
                    threshold = lo;
                }
                best = Some(SplitCandidate {
                    feature: f,
                    threshold,
                    gain,
                    left_count: n_l,
                    right_count: n_r,
                });
            }
        }
    }
    best
}

fn mean_target(rows: &[usize], targets: &[f64]) -> f64 {
    rows.iter().map(|&r| targets[r]).sum::<f64>() / rows.len() as f64
}

/// Grows a tree greedily. Leaves hold the mean target of their rows, which is
/// the positive-class fraction under [`Criterion::Gini`].
pub fn build_tree(
    rows: &[usize],
    ds: &Dataset,
    targets: &[f64],
    cfg: &TreeConfig,
    rng_seed: u64,
) -> Result<TreeNode> {
    cfg.validate()?;
    if rows.is_empty() {
        return Err(Error::data("cannot grow a tree on zero rows"));
    }
    if targets.len() != ds.n_rows() {
        return Err(Error::data(format!(
            "{} targets for a dataset of {} rows",
            targets.len(),
            ds.n_rows()
        )));
    }
    let mut rng = seed::rng(rng_seed);
    Ok(grow(rows.to_vec(), ds, targets, cfg, 0, &mut rng))
}

fn grow(
    rows: Vec<usize>,
    ds: &Dataset,
    targets: &[f64],
    cfg: &TreeConfig,
    depth: usize,
    rng: &mut seed::Rng,
) -> TreeNode {
    if depth >= cfg.max_depth || rows.len() < 2 * cfg.min_samples_leaf {
        return TreeNode::Leaf(mean_target(&rows, targets));
    }
    let candidates = cfg.feature_sampler.draw(ds.n_cols(), rng);
    let Some(split) = best_split(&rows, ds, targets, &candidates, cfg) else {
        return TreeNode::Leaf(mean_target(&rows, targets));
    };
    let n_samples = rows.len();
    let (left, right): (Vec<usize>, Vec<usize>) = rows
        .into_iter()
        .partition(|&r| ds.value(r, split.feature) <= split.threshold);
    debug_assert_eq!(left.len(), split.left_count);
    let left = grow(left, ds, targets, cfg, depth + 1, rng);
    let right = grow(right, ds, targets, cfg, depth + 1, rng);
    TreeNode::Split(SplitNode {
        feature: split.feature,
        threshold: split.threshold,
        gain: split.gain,
        n_samples,
        left: Box::new(left),
        right: Box::new(right),
    })
}

/// Adds `gain * n_node / n_root` for every split to its feature's slot.
pub fn accumulate_importance(node: &TreeNode, out: &mut [f64]) {
    if let TreeNode::Split(root) = node {
        add_importance(node, root.n_samples.max(1) as f64, out);
    }
}

fn add_importance(node: &TreeNode, total: f64, out: &mut [f64]) {
    if let TreeNode::Split(s) = node {
        out[s.feature] += s.gain * s.n_samples as f64 / total;
        add_importance(&s.left, total, out);
        add_importance(&s.right, total, out);
    }
}

/// Scales a nonnegative vector to sum to one; uniform when it sums to zero.
pub fn normalize_importance(raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    if total > 0.0 && total.is_finite() {
        raw.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / raw.len() as f64; raw.len()]
    }
}
