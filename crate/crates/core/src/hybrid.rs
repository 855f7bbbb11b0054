//! GBM-SSRF: boosting combined with the importance-guided forest.
//!
//! Two modes are supported.
//!
//! *Blend* fits both members independently on the training labels and mixes
//! their outputs in probability space:
//!
//! ```text
//! p(x) = (1 - alpha) * sigmoid(F_gbm(x)) + sum_m (alpha / M) * T_m(x)
//! ```
//!
//! so `alpha` is the total weight carried by the forest and each tree gets
//! `alpha / M`. `alpha` is either fixed or picked on the validation split by
//! log-loss over the grid `{0, 0.05, ..., 1}`. [`BlendSpace::RawMargin`]
//! instead adds the weighted tree outputs to the boosting margin before the
//! sigmoid.
//!
//! *Embedded* runs the boosting loop with a small forest, fitted to the
//! residuals, as every stage learner.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, SplitAssignment};
use crate::error::{Error, Result};
use crate::gbm::{boost, fit_gbm, sigmoid, stage_rows, Booster, GbmConfig, GbmModel, StageLearner};
use crate::seed;
use crate::ssrf::{
    check_width, fit_pilot_importance, fit_ssrf, fit_ssrf_with_importance, SsrfConfig, SsrfModel,
};
use crate::tree::{accumulate_importance, normalize_importance, Criterion, TreeNode};

pub const SCHEMA_VERSION: u32 = 1;

const LOG_LOSS_EPS: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HybridMode {
    #[default]
    Blend,
    Embedded,
}

impl FromStr for HybridMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blend" => Ok(HybridMode::Blend),
            "embedded" => Ok(HybridMode::Embedded),
            other => Err(Error::config(format!("unknown mode '{other}' (blend|embedded)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlendSpace {
    #[default]
    Probability,
    RawMargin,
}

/// Either a fixed number or the literal `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Setting {
    #[default]
    Auto,
    Fixed(f64),
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Setting::Auto);
        }
        s.parse::<f64>()
            .map(Setting::Fixed)
            .map_err(|_| Error::config(format!("expected 'auto' or a number, got '{s}'")))
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Setting::Auto => f.write_str("auto"),
            Setting::Fixed(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SettingRepr {
    Number(f64),
    Text(String),
}

impl Serialize for Setting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Setting::Auto => SettingRepr::Text("auto".into()),
            Setting::Fixed(v) => SettingRepr::Number(*v),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Setting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match SettingRepr::deserialize(d)? {
            SettingRepr::Number(v) => Ok(Setting::Fixed(v)),
            SettingRepr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdPolicy {
    Fixed05,
    MaxF1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    pub mode: HybridMode,
    pub gbm: GbmConfig,
    pub ssrf: SsrfConfig,
    /// Forest weight; `auto` picks it on the validation split.
    pub alpha: Setting,
    /// Decision threshold; `auto` maximizes validation F1.
    pub threshold: Setting,
    pub seed: u64,
    /// Trees per stage in embedded mode.
    pub stage_forest_size: usize,
    pub blend_space: BlendSpace,
}

impl Default for HybridConfig {
    fn default() -> Self {
        HybridConfig {
            mode: HybridMode::Blend,
            gbm: GbmConfig::default(),
            ssrf: SsrfConfig::default(),
            alpha: Setting::Auto,
            threshold: Setting::Auto,
            seed: 0,
            stage_forest_size: 5,
            blend_space: BlendSpace::Probability,
        }
    }
}

/// Mean of a few residual trees; the stage learner of embedded mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StageForest {
    pub trees: Vec<TreeNode>,
}

impl StageLearner for StageForest {
    #[inline]
    fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    fn add_importance(&self, out: &mut [f64]) {
        for t in &self.trees {
            accumulate_importance(t, out);
        }
    }
}

pub type EmbeddedGbm = Booster<StageForest>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GbmPart {
    Plain(GbmModel),
    Embedded(EmbeddedGbm),
}

impl GbmPart {
    fn n_features(&self) -> usize {
        match self {
            GbmPart::Plain(m) => m.n_features,
            GbmPart::Embedded(m) => m.n_features,
        }
    }

    fn importance(&self) -> Vec<f64> {
        match self {
            GbmPart::Plain(m) => m.importance(),
            GbmPart::Embedded(m) => m.importance(),
        }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        match self {
            GbmPart::Plain(m) => m.score(x),
            GbmPart::Embedded(m) => m.score(x),
        }
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        match self {
            GbmPart::Plain(m) => m.probability(x),
            GbmPart::Embedded(m) => m.probability(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridModel {
    pub schema_version: u32,
    pub mode: HybridMode,
    pub alpha: f64,
    pub threshold: f64,
    pub blend_space: BlendSpace,
    pub gbm: GbmPart,
    pub ssrf: Option<SsrfModel>,
    pub importance: Vec<f64>,
}

impl HybridModel {
    pub fn n_features(&self) -> usize {
        self.gbm.n_features()
    }

    /// Weight of each forest tree in the blend, `alpha / M`.
    pub fn tree_weight(&self) -> f64 {
        match &self.ssrf {
            Some(f) => self.alpha / f.trees.len() as f64,
            None => 0.0,
        }
    }

    /// Probability for one row, unchecked width.
    pub fn score(&self, x: &[f64]) -> f64 {
        match (&self.ssrf, self.blend_space) {
            (Some(forest), BlendSpace::Probability) => {
                (1.0 - self.alpha) * self.gbm.probability(x) + self.alpha * forest.score(x)
            }
            (Some(forest), BlendSpace::RawMargin) => {
                sigmoid(self.gbm.score(x) + self.alpha * forest.score(x))
            }
            (None, _) => self.gbm.probability(x),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_width(x, self.n_features())?;
        Ok(self.score(x))
    }
}

pub fn predict_hybrid(model: &HybridModel, x: &[f64]) -> Result<f64> {
    model.predict(x)
}

fn log_loss(p: f64, y: f64) -> f64 {
    let p = p.clamp(LOG_LOSS_EPS, 1.0 - LOG_LOSS_EPS);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

fn search_alpha(loss_at: impl Fn(f64) -> f64) -> f64 {
    let mut best_alpha: f64 = 0.0;
    let mut best_loss = loss_at(0.0);
    for i in 1..=20 {
        let alpha = i as f64 / 20.0;
        let loss = loss_at(alpha);
        let tie = (loss - best_loss).abs() <= 1e-12 * best_loss.abs().max(1e-300);
        if tie {
            if (alpha - 0.5).abs() < (best_alpha - 0.5).abs() {
                best_alpha = alpha;
            }
        } else if loss < best_loss {
            best_loss = loss;
            best_alpha = alpha;
        }
    }
    best_alpha
}

/// Forest weight minimizing validation log-loss of the convex combination
/// over `{0, 0.05, ..., 1}`; ties go to the value closest to 0.5.
pub fn resolve_blend_weight(gbm_probs: &[f64], ssrf_probs: &[f64], labels: &[f64]) -> Result<f64> {
    if gbm_probs.is_empty() || gbm_probs.len() != ssrf_probs.len() || gbm_probs.len() != labels.len() {
        return Err(Error::data("blend weight needs aligned nonempty vectors"));
    }
    Ok(search_alpha(|alpha| {
        gbm_probs
            .iter()
            .zip(ssrf_probs)
            .zip(labels)
            .map(|((&g, &s), &y)| log_loss((1.0 - alpha) * g + alpha * s, y))
            .sum::<f64>()
    }))
}

/// Decision threshold from validation scores. `MaxF1` scans the midpoints of
/// consecutive distinct scores and keeps the largest threshold reaching the
/// best F1.
pub fn resolve_threshold(probs: &[f64], labels: &[f64], policy: ThresholdPolicy) -> Result<f64> {
    if probs.is_empty() || probs.len() != labels.len() {
        return Err(Error::data("threshold search needs aligned nonempty vectors"));
    }
    if policy == ThresholdPolicy::Fixed05 {
        return Ok(0.5);
    }
    let n_pos = labels.iter().filter(|&&y| y == 1.0).count() as u64;
    if n_pos == 0 || n_pos == labels.len() as u64 {
        return Err(Error::data(
            "max-F1 threshold needs both classes in the validation split",
        ));
    }
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
    // sweep from the highest score down; predicted positives are p > t
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut best: Option<(u64, u64, f64)> = None;
    let mut i = 0;
    while i < order.len() {
        let v = probs[order[i]];
        while i < order.len() && probs[order[i]] == v {
            if labels[order[i]] == 1.0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        if i == order.len() {
            break;
        }
        let next = probs[order[i]];
        let mut t = 0.5 * v + 0.5 * next;
        if !(t > next && t < v) {
            t = next;
        }
        // F1 = 2TP / (2TP + FP + FN), compared exactly as a fraction
        let num = 2 * tp;
        let den = 2 * tp + fp + (n_pos - tp);
        let improves = match best {
            None => true,
            Some((bn, bd, _)) => (num as u128) * (bd as u128) > (bn as u128) * (den as u128),
        };
        if improves {
            best = Some((num, den, t));
        }
    }
    Ok(best.map_or(0.5, |(_, _, t)| t))
}

/// `(1 - alpha) * GBM importance + alpha * forest importance`.
pub fn merged_importance(model: &HybridModel) -> Vec<f64> {
    let gbm = model.gbm.importance();
    match &model.ssrf {
        Some(forest) => {
            let a = model.alpha;
            let mixed: Vec<f64> = gbm
                .iter()
                .zip(&forest.importance)
                .map(|(g, s)| (1.0 - a) * g + a * s)
                .collect();
            normalize_importance(&mixed)
        }
        None => gbm,
    }
}

fn resolve_fixed(value: f64, what: &str, open: bool) -> Result<f64> {
    let ok = if open {
        value > 0.0 && value < 1.0
    } else {
        (0.0..=1.0).contains(&value)
    };
    if ok {
        Ok(value)
    } else {
        Err(Error::config(format!("{what} {value} is out of range")))
    }
}

fn embedded_stage_config(cfg: &HybridConfig, stage: usize) -> SsrfConfig {
    SsrfConfig {
        n_trees: cfg.stage_forest_size,
        criterion: Criterion::Mse,
        pilot_trees: 0,
        seed: seed::derive(cfg.seed, seed::STREAM_STAGE, stage as u64),
        ..cfg.ssrf.clone()
    }
}

/// Boosting with a residual-fitted forest of `stage_forest_size` trees per
/// stage. Pilot importance is estimated once from the training labels.
pub fn fit_embedded(ds: &Dataset, rows: &[usize], cfg: &HybridConfig) -> Result<EmbeddedGbm> {
    if cfg.stage_forest_size == 0 {
        return Err(Error::config("stage_forest_size must be at least 1"));
    }
    let gbm_cfg = GbmConfig {
        seed: cfg.seed,
        ..cfg.gbm.clone()
    };
    let pilot_cfg = SsrfConfig {
        seed: cfg.seed,
        ..cfg.ssrf.clone()
    };
    let pilot = fit_pilot_importance(ds, rows, ds.labels(), &pilot_cfg)?;
    boost(ds, rows, ds.labels(), &gbm_cfg, |rows, residuals, m| {
        let sample = stage_rows(rows, &gbm_cfg, m);
        let forest = fit_ssrf_with_importance(
            ds,
            &sample,
            residuals,
            &embedded_stage_config(cfg, m),
            pilot.clone(),
        )?;
        Ok(StageForest {
            trees: forest.trees,
        })
    })
}

fn validation_labels(ds: &Dataset, split: &SplitAssignment) -> Vec<f64> {
    split.valid.iter().map(|&i| ds.labels()[i]).collect()
}

pub fn fit_hybrid(ds: &Dataset, split: &SplitAssignment, cfg: &HybridConfig) -> Result<HybridModel> {
    if split.train.is_empty() {
        return Err(Error::data("training split is empty"));
    }
    if split.valid.is_empty() && (cfg.alpha == Setting::Auto || cfg.threshold == Setting::Auto) {
        return Err(Error::data("'auto' alpha or threshold needs a nonempty validation split"));
    }
    let mut model = match cfg.mode {
        HybridMode::Blend => {
            let gbm_cfg = GbmConfig {
                seed: cfg.seed,
                ..cfg.gbm.clone()
            };
            let ssrf_cfg = SsrfConfig {
                seed: cfg.seed,
                ..cfg.ssrf.clone()
            };
            let (gbm, forest) = rayon::join(
                || fit_gbm(ds, &split.train, ds.labels(), &gbm_cfg),
                || fit_ssrf(ds, &split.train, ds.labels(), &ssrf_cfg),
            );
            let (gbm, forest) = (gbm?, forest?);
            let alpha = match cfg.alpha {
                Setting::Fixed(a) => resolve_fixed(a, "alpha", false)?,
                Setting::Auto => {
                    let labels = validation_labels(ds, split);
                    match cfg.blend_space {
                        BlendSpace::Probability => {
                            let g: Vec<f64> = split.valid.iter().map(|&i| gbm.probability(ds.row(i))).collect();
                            let s: Vec<f64> = split.valid.iter().map(|&i| forest.score(ds.row(i))).collect();
                            resolve_blend_weight(&g, &s, &labels)?
                        }
                        BlendSpace::RawMargin => {
                            let g: Vec<f64> = split.valid.iter().map(|&i| gbm.score(ds.row(i))).collect();
                            let s: Vec<f64> = split.valid.iter().map(|&i| forest.score(ds.row(i))).collect();
                            search_alpha(|a| {
                                g.iter()
                                    .zip(&s)
                                    .zip(&labels)
                                    .map(|((&g, &s), &y)| log_loss(sigmoid(g + a * s), y))
                                    .sum()
                            })
                        }
                    }
                }
            };
            HybridModel {
                schema_version: SCHEMA_VERSION,
                mode: HybridMode::Blend,
                alpha,
                threshold: 0.5,
                blend_space: cfg.blend_space,
                gbm: GbmPart::Plain(gbm),
                ssrf: Some(forest),
                importance: Vec::new(),
            }
        }
        HybridMode::Embedded => HybridModel {
            schema_version: SCHEMA_VERSION,
            mode: HybridMode::Embedded,
            alpha: 0.0,
            threshold: 0.5,
            blend_space: cfg.blend_space,
            gbm: GbmPart::Embedded(fit_embedded(ds, &split.train, cfg)?),
            ssrf: None,
            importance: Vec::new(),
        },
    };
    model.threshold = match cfg.threshold {
        Setting::Fixed(t) => resolve_fixed(t, "threshold", true)?,
        Setting::Auto => {
            let probs: Vec<f64> = split.valid.iter().map(|&i| model.score(ds.row(i))).collect();
            resolve_threshold(&probs, &validation_labels(ds, split), ThresholdPolicy::MaxF1)?
        }
    };
    model.importance = merged_importance(&model);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn setting_parses_and_serializes() {
        assert_eq!("auto".parse::<Setting>().unwrap(), Setting::Auto);
        assert_eq!("0.25".parse::<Setting>().unwrap(), Setting::Fixed(0.25));
        assert!("x".parse::<Setting>().is_err());
        assert_eq!(serde_json::to_string(&Setting::Auto).unwrap(), "\"auto\"");
        assert_eq!(serde_json::from_str::<Setting>("0.4").unwrap(), Setting::Fixed(0.4));
        assert_eq!(serde_json::from_str::<Setting>("\"auto\"").unwrap(), Setting::Auto);
    }

    #[test]
    fn dominant_member_and_tie_rule() {
        let labels = [0.0, 1.0, 0.0, 1.0, 1.0];
        let half = [0.5; 5];
        assert_eq!(resolve_blend_weight(&half, &labels, &labels).unwrap(), 1.0);
        assert_eq!(resolve_blend_weight(&labels, &half, &labels).unwrap(), 0.0);
        let p = [0.2, 0.7, 0.4, 0.9, 0.6];
        assert_eq!(resolve_blend_weight(&p, &p, &labels).unwrap(), 0.5);
    }

    #[test]
    fn threshold_policies() {
        let probs = [0.1, 0.2, 0.8, 0.9];
        let labels = [0.0, 0.0, 1.0, 1.0];
        assert_eq!(resolve_threshold(&probs, &labels, ThresholdPolicy::Fixed05).unwrap(), 0.5);
        assert_eq!(resolve_threshold(&probs, &labels, ThresholdPolicy::MaxF1).unwrap(), 0.5);
        assert!(resolve_threshold(&probs, &[1.0; 4], ThresholdPolicy::MaxF1).is_err());
    }

    #[test]
    fn threshold_ties_prefer_larger() {
        // t=0.35 gives TP=2,FP=1,FN=0 -> F1 0.8; t=0.65 gives TP=2,FP=0,FN=0 -> 1.0
        // t=0.85 gives TP=1,FN=1 -> F1 2/3
        let probs = [0.2, 0.5, 0.8, 0.9];
        let labels = [0.0, 0.0, 1.0, 1.0];
        let t = resolve_threshold(&probs, &labels, ThresholdPolicy::MaxF1).unwrap();
        assert!((t - 0.65).abs() < 1e-15);
        // t=0.8 gives TP=1,FP=0,FN=1 and t=0.2 gives TP=2,FP=2,FN=0: both F1 = 2/3
        let probs = [0.9, 0.7, 0.6, 0.3, 0.1];
        let labels = [1.0, 0.0, 0.0, 1.0, 0.0];
        let t = resolve_threshold(&probs, &labels, ThresholdPolicy::MaxF1).unwrap();
        assert!((t - 0.8).abs() < 1e-15, "{t}");
    }
}
