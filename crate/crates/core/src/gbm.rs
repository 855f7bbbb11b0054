//! Stagewise gradient boosting.
//!
//! ```text
//! F_0    = argmin_gamma sum L(y_i, gamma)
//! g_i    = -dL(y_i, F_{m-1}(x_i)) / dF
//! h_m    = least-squares regression tree fitted to g
//! F_m    = F_{m-1} + eta * h_m
//! F(x)   = F_0 + sum_m eta * h_m(x)
//! ```
//!
//! The stage loop in [`boost`] is generic over the stage learner so the
//! embedded hybrid can plug small forests in where plain boosting uses a
//! single tree.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed;
use crate::ssrf::check_width;
use crate::tree::{accumulate_importance, build_tree, normalize_importance, Criterion, TreeConfig, TreeNode};

const LOGISTIC_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    /// `0.5 (y - F)^2`
    Squared,
    /// Binomial deviance `log(1 + e^F) - y F`.
    #[default]
    Logistic,
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl Loss {
    #[inline]
    pub fn value(self, y: f64, f: f64) -> f64 {
        match self {
            Loss::Squared => 0.5 * (y - f) * (y - f),
            Loss::Logistic => softplus(f) - y * f,
        }
    }

    #[inline]
    pub fn negative_gradient(self, y: f64, f: f64) -> f64 {
        match self {
            Loss::Squared => y - f,
            Loss::Logistic => y - sigmoid(f),
        }
    }

    /// Maps a raw score to the output scale: probability for logistic loss,
    /// the score clamped to `[0, 1]` for squared loss.
    #[inline]
    pub fn to_probability(self, f: f64) -> f64 {
        match self {
            Loss::Squared => f.clamp(0.0, 1.0),
            Loss::Logistic => sigmoid(f),
        }
    }
}

/// Optimal constant model. For logistic loss the positive fraction is clamped
/// to `[1e-6, 1 - 1e-6]` so one-class targets stay finite.
pub fn init_base_score(targets: &[f64], loss: Loss) -> f64 {
    weighted_base_score(targets, &vec![1.0; targets.len()], loss)
}

fn weighted_base_score(targets: &[f64], weights: &[f64], loss: Loss) -> f64 {
    let wsum: f64 = weights.iter().sum();
    let mean = targets.iter().zip(weights).map(|(y, w)| y * w).sum::<f64>() / wsum;
    match loss {
        Loss::Squared => mean,
        Loss::Logistic => {
            let p = mean.clamp(LOGISTIC_CLAMP, 1.0 - LOGISTIC_CLAMP);
            (p / (1.0 - p)).ln()
        }
    }
}

pub fn negative_gradient(targets: &[f64], scores: &[f64], loss: Loss) -> Vec<f64> {
    assert_eq!(targets.len(), scores.len(), "targets and scores must align");
    targets
        .iter()
        .zip(scores)
        .map(|(&y, &f)| loss.negative_gradient(y, f))
        .collect()
}

pub fn update_model(prev: &[f64], stage: &[f64], learning_rate: f64) -> Vec<f64> {
    assert_eq!(prev.len(), stage.len(), "score vectors must align");
    prev.iter()
        .zip(stage)
        .map(|(f, h)| f + learning_rate * h)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmConfig {
    pub n_stages: usize,
    pub learning_rate: f64,
    /// Weak learner; always grown with the MSE criterion.
    pub tree: TreeConfig,
    pub subsample: f64,
    pub seed: u64,
    pub loss: Loss,
    /// Multiplier on positive-class gradients and loss terms.
    pub positive_weight: f64,
}

impl Default for GbmConfig {
    fn default() -> Self {
        GbmConfig {
            n_stages: 100,
            learning_rate: 0.1,
            tree: TreeConfig {
                max_depth: 3,
                min_samples_leaf: 5,
                criterion: Criterion::Mse,
                ..TreeConfig::default()
            },
            subsample: 1.0,
            seed: 0,
            loss: Loss::Logistic,
            positive_weight: 1.0,
        }
    }
}

impl GbmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_stages == 0 {
            return Err(Error::config("n_stages must be at least 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::config(format!(
                "learning_rate must lie in [0, 1], got {}",
                self.learning_rate
            )));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::config(format!(
                "subsample must lie in (0, 1], got {}",
                self.subsample
            )));
        }
        if !(self.positive_weight > 0.0 && self.positive_weight.is_finite()) {
            return Err(Error::config("positive_weight must be positive"));
        }
        self.tree.validate()
    }

    fn weak_learner(&self) -> TreeConfig {
        TreeConfig {
            criterion: Criterion::Mse,
            ..self.tree.clone()
        }
    }
}

/// A fitted stage: anything that maps a row to a real value.
pub trait StageLearner {
    fn predict(&self, x: &[f64]) -> f64;
    fn add_importance(&self, out: &mut [f64]);
}

impl StageLearner for TreeNode {
    #[inline]
    fn predict(&self, x: &[f64]) -> f64 {
        TreeNode::predict(self, x)
    }

    fn add_importance(&self, out: &mut [f64]) {
        accumulate_importance(self, out);
    }
}

/// Additive model `F(x) = base_score + sum_m learning_rate * stage_m(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Booster<S> {
    pub base_score: f64,
    pub learning_rate: f64,
    pub loss: Loss,
    pub n_features: usize,
    pub stages: Vec<S>,
    /// Weighted mean training loss; entry 0 is the constant model, entry `m`
    /// the model after `m` stages.
    pub loss_trace: Vec<f64>,
}

pub type GbmModel = Booster<TreeNode>;

impl<S: StageLearner> Booster<S> {
    /// Raw additive score, unchecked width.
    #[inline]
    pub fn score(&self, x: &[f64]) -> f64 {
        let mut f = self.base_score;
        for s in &self.stages {
            f += self.learning_rate * s.predict(x);
        }
        f
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_width(x, self.n_features)?;
        Ok(self.score(x))
    }

    #[inline]
    pub fn probability(&self, x: &[f64]) -> f64 {
        self.loss.to_probability(self.score(x))
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        check_width(x, self.n_features)?;
        Ok(self.probability(x))
    }

    /// Normalized impurity importance summed over all stages.
    pub fn importance(&self) -> Vec<f64> {
        let mut raw = vec![0.0; self.n_features];
        for s in &self.stages {
            s.add_importance(&mut raw);
        }
        normalize_importance(&raw)
    }

    /// Number of leading stages minimizing mean loss on `rows`, ties to the
    /// shorter prefix. Returns at least 1.
    pub fn best_prefix(&self, ds: &Dataset, rows: &[usize]) -> usize {
        let mut scores: Vec<f64> = vec![self.base_score; rows.len()];
        let mut best = (f64::INFINITY, 1);
        for (m, s) in self.stages.iter().enumerate() {
            let mut total = 0.0;
            for (f, &r) in scores.iter_mut().zip(rows) {
                *f += self.learning_rate * s.predict(ds.row(r));
                total += self.loss.value(ds.labels()[r], *f);
            }
            let mean = total / rows.len().max(1) as f64;
            if mean < best.0 {
                best = (mean, m + 1);
            }
        }
        best.1
    }

    pub fn truncate(&mut self, n_stages: usize) {
        self.stages.truncate(n_stages);
        self.loss_trace.truncate(n_stages + 1);
    }
}

pub fn predict_gbm(model: &GbmModel, x: &[f64]) -> Result<f64> {
    model.predict(x)
}

/// Rows used by stage `m`: all of them, or a seeded subsample without
/// replacement of `round(subsample * n)` rows.
pub fn stage_rows(rows: &[usize], cfg: &GbmConfig, stage: usize) -> Vec<usize> {
    if cfg.subsample >= 1.0 {
        return rows.to_vec();
    }
    let n = rows.len();
    let count = ((cfg.subsample * n as f64).round() as usize).clamp(1, n);
    let mut rng = seed::rng(seed::derive(cfg.seed, seed::STREAM_SUBSAMPLE, stage as u64));
    let mut picked = rand::seq::index::sample(&mut rng, n, count).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| rows[i]).collect()
}

/// Regression tree fitted to `residuals` (aligned with the dataset's rows)
/// over the stage's subsample of `rows`.
pub fn fit_stage(
    ds: &Dataset,
    rows: &[usize],
    residuals: &[f64],
    cfg: &GbmConfig,
    stage: usize,
) -> Result<TreeNode> {
    let sample = stage_rows(rows, cfg, stage);
    build_tree(
        &sample,
        ds,
        residuals,
        &cfg.weak_learner(),
        seed::derive(cfg.seed, seed::STREAM_STAGE, stage as u64),
    )
}

/// Runs the boosting loop; `fit` receives the training rows, residuals
/// aligned with the dataset's rows, and the stage index.
pub fn boost<S, F>(
    ds: &Dataset,
    rows: &[usize],
    targets: &[f64],
    cfg: &GbmConfig,
    mut fit: F,
) -> Result<Booster<S>>
where
    S: StageLearner,
    F: FnMut(&[usize], &[f64], usize) -> Result<S>,
{
    cfg.validate()?;
    if rows.is_empty() {
        return Err(Error::data("cannot boost on zero rows"));
    }
    if targets.len() != ds.n_rows() {
        return Err(Error::data(format!(
            "{} targets for a dataset of {} rows",
            targets.len(),
            ds.n_rows()
        )));
    }
    let loss = cfg.loss;
    let y: Vec<f64> = rows.iter().map(|&r| targets[r]).collect();
    let w: Vec<f64> = y
        .iter()
        .map(|&v| if v == 1.0 { cfg.positive_weight } else { 1.0 })
        .collect();
    let wsum: f64 = w.iter().sum();
    let base_score = weighted_base_score(&y, &w, loss);
    let mut scores = vec![base_score; rows.len()];
    let mean_loss = |scores: &[f64]| -> f64 {
        y.iter()
            .zip(scores)
            .zip(&w)
            .map(|((&y, &f), &w)| w * loss.value(y, f))
            .sum::<f64>()
            / wsum
    };

    let mut loss_trace = Vec::with_capacity(cfg.n_stages + 1);
    loss_trace.push(mean_loss(&scores));
    let mut residuals = vec![0.0; ds.n_rows()];
    let mut stages = Vec::with_capacity(cfg.n_stages);
    for m in 0..cfg.n_stages {
        for (i, &r) in rows.iter().enumerate() {
            residuals[r] = w[i] * loss.negative_gradient(y[i], scores[i]);
        }
        let learner = fit(rows, &residuals, m)?;
        for (f, &r) in scores.iter_mut().zip(rows) {
            *f += cfg.learning_rate * learner.predict(ds.row(r));
        }
        let l = mean_loss(&scores);
        if !l.is_finite() {
            return Err(Error::Invariant(format!("training loss became {l} at stage {m}")));
        }
        loss_trace.push(l);
        stages.push(learner);
    }
    Ok(Booster {
        base_score,
        learning_rate: cfg.learning_rate,
        loss,
        n_features: ds.n_cols(),
        stages,
        loss_trace,
    })
}

pub fn fit_gbm(ds: &Dataset, rows: &[usize], targets: &[f64], cfg: &GbmConfig) -> Result<GbmModel> {
    boost(ds, rows, targets, cfg, |rows, residuals, m| {
        fit_stage(ds, rows, residuals, cfg, m)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::UNLIMITED_DEPTH;

    fn four_points() -> Dataset {
        Dataset::from_rows(
            &[vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
            vec![0.0, 0.0, 1.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn base_scores() {
        assert_eq!(init_base_score(&[1.0, 2.0, 3.0], Loss::Squared), 2.0);
        let b = init_base_score(&[1.0, 0.0, 0.0, 0.0], Loss::Logistic);
        assert!((b - (0.25f64 / 0.75).ln()).abs() < 1e-15);
        assert!((b + 1.098612).abs() < 1e-6);
        let all = init_base_score(&[1.0; 5], Loss::Logistic);
        assert!(all.is_finite());
        assert!((all - ((1.0 - 1e-6) / 1e-6f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn gradients() {
        assert_eq!(Loss::Squared.negative_gradient(2.0, 1.5), 0.5);
        assert_eq!(Loss::Logistic.negative_gradient(1.0, 0.0), 0.5);
        assert_eq!(Loss::Logistic.negative_gradient(0.0, 0.0), -0.5);
        assert_eq!(negative_gradient(&[2.0, 0.0], &[1.5, 0.0], Loss::Squared), vec![0.5, 0.0]);
    }

    #[test]
    fn update_arithmetic() {
        let out = update_model(&[0.3], &[2.0], 0.1);
        assert!((out[0] - 0.5).abs() < 1e-15);
        assert_eq!(update_model(&[0.3, -1.0], &[2.0, 5.0], 0.0), vec![0.3, -1.0]);
    }

    #[test]
    fn constant_residuals_give_a_leaf() {
        let ds = four_points();
        let cfg = GbmConfig::default();
        let t = fit_stage(&ds, &[0, 1, 2, 3], &[0.25; 4], &cfg, 0).unwrap();
        assert_eq!(t, TreeNode::Leaf(0.25));
    }

    #[test]
    fn separated_residuals_give_group_means() {
        let ds = four_points();
        let cfg = GbmConfig {
            tree: TreeConfig {
                max_depth: 1,
                min_samples_leaf: 1,
                ..GbmConfig::default().tree
            },
            ..GbmConfig::default()
        };
        let t = fit_stage(&ds, &[0, 1, 2, 3], &[-1.0, -3.0, 2.0, 4.0], &cfg, 0).unwrap();
        assert_eq!(t.predict(&[0.0]), -2.0);
        assert_eq!(t.predict(&[3.0]), 3.0);
        assert_eq!(t, fit_stage(&ds, &[0, 1, 2, 3], &[-1.0, -3.0, 2.0, 4.0], &cfg, 0).unwrap());
    }

    #[test]
    fn one_full_stage_interpolates() {
        let ds = four_points();
        let cfg = GbmConfig {
            n_stages: 1,
            learning_rate: 1.0,
            loss: Loss::Squared,
            tree: TreeConfig {
                max_depth: UNLIMITED_DEPTH,
                min_samples_leaf: 1,
                ..GbmConfig::default().tree
            },
            ..GbmConfig::default()
        };
        let m = fit_gbm(&ds, &[0, 1, 2, 3], ds.labels(), &cfg).unwrap();
        for i in 0..4 {
            assert_eq!(ds.labels()[i] - m.score(ds.row(i)), 0.0);
        }
        assert_eq!(*m.loss_trace.last().unwrap(), 0.0);
    }

    #[test]
    fn zero_learning_rate_keeps_base() {
        let ds = four_points();
        let cfg = GbmConfig {
            n_stages: 1,
            learning_rate: 0.0,
            ..GbmConfig::default()
        };
        let m = fit_gbm(&ds, &[0, 1, 2, 3], ds.labels(), &cfg).unwrap();
        for i in 0..4 {
            assert_eq!(m.score(ds.row(i)), m.base_score);
        }
        let bad = GbmConfig {
            n_stages: 0,
            ..GbmConfig::default()
        };
        assert!(fit_gbm(&ds, &[0, 1, 2, 3], ds.labels(), &bad).is_err());
    }

    #[test]
    fn refitting_stage_two_differs_from_one_combined_step() {
        // Two sequential stages refit on new residuals; a single stage with
        // twice the step on the first tree does not land at the same scores.
        let ds = Dataset::from_rows(
            &[vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 1.0], vec![3.0, 0.0]],
            vec![0.0, 1.0, 1.0, 0.0],
        )
        .unwrap();
        let rows = [0, 1, 2, 3];
        let cfg = GbmConfig {
            n_stages: 2,
            learning_rate: 0.5,
            loss: Loss::Logistic,
            tree: TreeConfig {
                max_depth: 1,
                min_samples_leaf: 1,
                ..GbmConfig::default().tree
            },
            ..GbmConfig::default()
        };
        let two = fit_gbm(&ds, &rows, ds.labels(), &cfg).unwrap();
        let h1: Vec<f64> = rows.iter().map(|&r| two.stages[0].predict(ds.row(r))).collect();
        let combined = update_model(&vec![two.base_score; 4], &h1.iter().map(|h| 2.0 * h).collect::<Vec<_>>(), 0.5);
        let sequential: Vec<f64> = rows.iter().map(|&r| two.score(ds.row(r))).collect();
        assert!(combined.iter().zip(&sequential).any(|(a, b)| (a - b).abs() > 1e-6));
    }

    #[test]
    fn class_weight_shifts_base_score() {
        let ds = four_points();
        let cfg = GbmConfig {
            n_stages: 1,
            positive_weight: 3.0,
            ..GbmConfig::default()
        };
        let m = fit_gbm(&ds, &[0, 1, 2, 3], ds.labels(), &cfg).unwrap();
        assert!((m.base_score - 3.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn subsample_is_seeded() {
        let rows: Vec<usize> = (0..100).collect();
        let cfg = GbmConfig {
            subsample: 0.3,
            seed: 4,
            ..GbmConfig::default()
        };
        let a = stage_rows(&rows, &cfg, 2);
        assert_eq!(a.len(), 30);
        assert_eq!(a, stage_rows(&rows, &cfg, 2));
        assert_ne!(a, stage_rows(&rows, &cfg, 3));
        assert_eq!(stage_rows(&rows, &GbmConfig::default(), 0), rows);
    }
}
