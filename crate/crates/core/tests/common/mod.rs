//! Reference implementations used as test oracles. They favour obviousness
//! over speed and share no code with the library.
#![allow(dead_code)]

use gbm_ssrf::tree::Criterion;
use gbm_ssrf::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn impurity(criterion: Criterion, ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    match criterion {
        Criterion::Gini => {
            let p1 = ys.iter().filter(|&&y| y == 1.0).count() as f64 / n;
            1.0 - p1 * p1 - (1.0 - p1) * (1.0 - p1)
        }
        Criterion::Mse => ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSplit {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Tries every feature and every midpoint between distinct values, computing
/// child impurities from scratch. Ties (relative 1e-12) keep the first
/// candidate in (feature, threshold) order.
pub fn brute_force_split(
    ds: &Dataset,
    targets: &[f64],
    rows: &[usize],
    features: &[usize],
    criterion: Criterion,
    min_leaf: usize,
    min_gain: f64,
) -> Option<OracleSplit> {
    let parent: Vec<f64> = rows.iter().map(|&r| targets[r]).collect();
    let n = parent.len() as f64;
    let base = impurity(criterion, &parent);
    let mut feats = features.to_vec();
    feats.sort();
    feats.dedup();
    let mut all = Vec::new();
    for &f in &feats {
        let mut vals: Vec<f64> = rows.iter().map(|&r| ds.value(r, f)).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let left: Vec<f64> = rows.iter().filter(|&&r| ds.value(r, f) <= t).map(|&r| targets[r]).collect();
            let right: Vec<f64> = rows.iter().filter(|&&r| ds.value(r, f) > t).map(|&r| targets[r]).collect();
            if left.len() < min_leaf || right.len() < min_leaf {
                continue;
            }
            let gain = base
                - left.len() as f64 / n * impurity(criterion, &left)
                - right.len() as f64 / n * impurity(criterion, &right);
            if gain > min_gain {
                all.push(OracleSplit {
                    feature: f,
                    threshold: t,
                    gain,
                });
            }
        }
    }
    let best = all.iter().map(|s| s.gain).fold(f64::NEG_INFINITY, f64::max);
    all.into_iter().find(|s| s.gain >= best - 1e-12 * best.abs())
}

/// Small dataset on a coarse value grid so that ties are common.
pub fn random_small_dataset(rng: &mut ChaCha8Rng, max_rows: usize, max_features: usize, binary: bool) -> Dataset {
    let n = rng.random_range(1..=max_rows);
    let d = rng.random_range(1..=max_features);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(0..5) as f64 * 0.5).collect())
        .collect();
    let labels = (0..n)
        .map(|_| {
            if binary {
                rng.random_range(0..2) as f64
            } else {
                rng.random_range(-20..=20) as f64 / 4.0
            }
        })
        .collect();
    Dataset::from_rows(&rows, labels).unwrap()
}

/// Fraction of (positive, negative) pairs ordered correctly, ties counted half.
pub fn all_pairs_auc(labels: &[f64], scores: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &yi) in labels.iter().enumerate() {
        if yi != 1.0 {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj == 1.0 {
                continue;
            }
            den += 1.0;
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    num / den
}

/// Golden-section minimization on `[lo, hi]`.
pub fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    (lo + hi) / 2.0
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random_range(-4.0..4.0)).collect()).collect()
}
