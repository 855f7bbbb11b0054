//! Transaction datasets: CSV ingestion, preprocessing, stratified splitting and
//! a synthetic generator.
//!
//! Features are stored row-major as `f64`. Missing cells are `NaN` until
//! [`apply_preprocess`] imputes them. Categorical columns must be encoded
//! numerically by the caller before ingestion.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<f64>,
    feature_names: Vec<String>,
    n_rows: usize,
    n_cols: usize,
}

impl Dataset {
    /// Builds a dataset from a row-major feature buffer.
    pub fn new(features: Vec<f64>, labels: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        let n_cols = feature_names.len();
        let n_rows = labels.len();
        if n_cols == 0 {
            return Err(Error::data("dataset has no feature columns"));
        }
        if features.len() != n_rows * n_cols {
            return Err(Error::data(format!(
                "feature buffer holds {} values, expected {} rows x {} columns",
                features.len(),
                n_rows,
                n_cols
            )));
        }
        Ok(Dataset {
            features,
            labels,
            feature_names,
            n_rows,
            n_cols,
        })
    }

    /// Builds a dataset from rows; feature names default to `x0, x1, ...`.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.len() != labels.len() {
            return Err(Error::data(format!(
                "{} feature rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n_cols) {
            return Err(Error::data(format!(
                "row {i} has {} values, expected {n_cols}",
                r.len()
            )));
        }
        let names = (0..n_cols).map(|j| format!("x{j}")).collect();
        Dataset::new(rows.concat(), labels, names)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.features[row * self.n_cols + col]
    }

    pub fn n_positive(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1.0).count()
    }

    pub fn has_missing(&self) -> bool {
        self.features.iter().any(|v| v.is_nan())
    }

    /// Returns a copy restricted to `rows`, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(rows.len() * self.n_cols);
        for &i in rows {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            features,
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            n_rows: rows.len(),
            n_cols: self.n_cols,
        }
    }

    /// SHA-256 over shape, names, feature bits and label bits.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n_rows as u64).to_le_bytes());
        h.update((self.n_cols as u64).to_le_bytes());
        for name in &self.feature_names {
            h.update(name.as_bytes());
            h.update([0u8]);
        }
        for v in &self.features {
            h.update(v.to_bits().to_le_bytes());
        }
        for v in &self.labels {
            h.update(v.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Writes features plus a label column. Missing values become empty cells.
    pub fn write_csv(&self, path: &Path, label_column: &str) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(label_column);
        w.write_record(&header).map_err(|e| csv_io(path, e))?;
        let mut record = Vec::with_capacity(self.n_cols + 1);
        for i in 0..self.n_rows {
            record.clear();
            record.extend(self.row(i).iter().map(|v| {
                if v.is_nan() {
                    String::new()
                } else {
                    v.to_string()
                }
            }));
            record.push(format!("{}", self.labels[i]));
            w.write_record(&record).map_err(|e| csv_io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::data(format!("{}: {:?}", path.display(), other)),
    }
}

/// How label literals map onto the binary classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub positive_label: String,
    pub negative_label: String,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            positive_label: "1".into(),
            negative_label: "0".into(),
        }
    }
}

/// Raw CSV contents: header plus string cells.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub headers: Vec<String>,
    pub records: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(std::io::BufReader::new(file));
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| csv_io(path, e))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
            return Err(Error::data(format!("{}: no header row", path.display())));
        }
        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_io(path, e))?;
            records.push(rec.iter().map(str::to_string).collect());
        }
        Ok(CsvTable { headers, records })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }
}

fn parse_cell(cell: &str) -> Option<f64> {
    let cell = cell.trim();
    if cell.is_empty() {
        Some(f64::NAN)
    } else {
        cell.parse::<f64>().ok().filter(|v| !v.is_nan())
    }
}

/// Extracts the named feature columns (in the given order) and, optionally,
/// the label column. Rows without a label column get label 0.
pub fn dataset_from_table(
    table: &CsvTable,
    feature_names: &[String],
    label_column: Option<&str>,
    opts: &IngestOptions,
) -> Result<Dataset> {
    let feature_cols: Vec<usize> = feature_names
        .iter()
        .map(|n| {
            table
                .column_index(n)
                .ok_or_else(|| Error::data(format!("missing feature column '{n}'")))
        })
        .collect::<Result<_>>()?;
    let label_col = match label_column {
        Some(name) => Some(
            table
                .column_index(name)
                .ok_or_else(|| Error::data(format!("label column '{name}' not found")))?,
        ),
        None => None,
    };
    let mut features = Vec::with_capacity(table.records.len() * feature_cols.len());
    let mut labels = Vec::with_capacity(table.records.len());
    for (r, rec) in table.records.iter().enumerate() {
        // line 1 is the header
        let line = r + 2;
        for (&c, name) in feature_cols.iter().zip(feature_names) {
            let cell = rec.get(c).map(String::as_str).unwrap_or("");
            let v = parse_cell(cell).ok_or_else(|| {
                Error::data(format!(
                    "non-numeric value '{cell}' at line {line}, column '{name}'"
                ))
            })?;
            features.push(v);
        }
        let y = match label_col {
            Some(c) => {
                let cell = rec.get(c).map(|s| s.trim()).unwrap_or("");
                if cell.is_empty() {
                    return Err(Error::data(format!("missing label at line {line}")));
                } else if cell == opts.positive_label {
                    1.0
                } else if cell == opts.negative_label {
                    0.0
                } else {
                    return Err(Error::data(format!(
                        "label '{cell}' at line {line} is neither '{}' nor '{}'",
                        opts.negative_label, opts.positive_label
                    )));
                }
            }
            None => 0.0,
        };
        labels.push(y);
    }
    Dataset::new(features, labels, feature_names.to_vec())
}

/// Loads a labelled CSV. Every non-label column becomes a feature.
pub fn load_csv(path: &Path, label_column: &str, opts: &IngestOptions) -> Result<Dataset> {
    let table = CsvTable::read(path)?;
    if table.column_index(label_column).is_none() {
        return Err(Error::data(format!(
            "{}: label column '{label_column}' not found",
            path.display()
        )));
    }
    let names: Vec<String> = table
        .headers
        .iter()
        .filter(|h| h.as_str() != label_column)
        .cloned()
        .collect();
    dataset_from_table(&table, &names, Some(label_column), opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImputeStrategy {
    #[default]
    Median,
    Mean,
}

/// Per-column imputation and z-score parameters fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessStats {
    pub strategy: ImputeStrategy,
    pub impute: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl PreprocessStats {
    /// Stats that leave clean data unchanged.
    pub fn identity(n_cols: usize) -> Self {
        PreprocessStats {
            strategy: ImputeStrategy::Median,
            impute: vec![0.0; n_cols],
            mean: vec![0.0; n_cols],
            std: vec![1.0; n_cols],
        }
    }

    pub fn n_cols(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_row(&self, row: &mut [f64]) {
        for (j, v) in row.iter_mut().enumerate() {
            if v.is_nan() {
                *v = self.impute[j];
            }
            *v = (*v - self.mean[j]) / self.std[j];
        }
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn fit_preprocess(ds: &Dataset, train_idx: &[usize]) -> Result<PreprocessStats> {
    fit_preprocess_with(ds, train_idx, ImputeStrategy::Median)
}

pub fn fit_preprocess_with(
    ds: &Dataset,
    train_idx: &[usize],
    strategy: ImputeStrategy,
) -> Result<PreprocessStats> {
    if train_idx.is_empty() {
        return Err(Error::data("cannot fit preprocessing on an empty training split"));
    }
    let d = ds.n_cols();
    let mut stats = PreprocessStats {
        strategy,
        impute: Vec::with_capacity(d),
        mean: Vec::with_capacity(d),
        std: Vec::with_capacity(d),
    };
    let mut present = Vec::with_capacity(train_idx.len());
    for j in 0..d {
        present.clear();
        present.extend(
            train_idx
                .iter()
                .map(|&i| ds.value(i, j))
                .filter(|v| !v.is_nan()),
        );
        if present.is_empty() {
            return Err(Error::data(format!(
                "column '{}' is entirely missing on the training split",
                ds.feature_names()[j]
            )));
        }
        let fill = match strategy {
            ImputeStrategy::Median => {
                present.sort_by(f64::total_cmp);
                median(&present)
            }
            ImputeStrategy::Mean => present.iter().sum::<f64>() / present.len() as f64,
        };
        let n = train_idx.len() as f64;
        let n_missing = (train_idx.len() - present.len()) as f64;
        let mean = (present.iter().sum::<f64>() + n_missing * fill) / n;
        let ss = present.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
            + n_missing * (fill - mean).powi(2);
        let std = (ss / n).sqrt();
        stats.impute.push(fill);
        stats.mean.push(mean);
        stats.std.push(if std > 1e-12 && std.is_finite() { std } else { 1.0 });
    }
    Ok(stats)
}

pub fn apply_preprocess(ds: &Dataset, stats: &PreprocessStats) -> Result<Dataset> {
    if stats.n_cols() != ds.n_cols() {
        return Err(Error::data(format!(
            "preprocess stats cover {} columns but dataset has {}",
            stats.n_cols(),
            ds.n_cols()
        )));
    }
    let mut out = ds.clone();
    for row in out.features.chunks_mut(out.n_cols) {
        stats.transform_row(row);
    }
    if let Some(j) = (0..out.n_cols).find(|&j| !stats.mean[j].is_finite() || !stats.std[j].is_finite()) {
        return Err(Error::data(format!("non-finite preprocess stats in column {j}")));
    }
    if out.features.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("non-finite value remains after preprocessing"));
    }
    Ok(out)
}

/// Disjoint train/validation/test row indices, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
    pub stratified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl SplitAssignment {
    pub fn parts(&self) -> [&[usize]; 3] {
        [&self.train, &self.valid, &self.test]
    }

    /// Largest absolute gap between a nonempty part's positive fraction and the
    /// global positive fraction.
    pub fn max_stratification_error(&self, labels: &[f64]) -> f64 {
        let n = labels.len() as f64;
        let global = labels.iter().filter(|&&y| y == 1.0).count() as f64 / n;
        self.parts()
            .iter()
            .filter(|p| !p.is_empty())
            .map(|p| {
                let pos = p.iter().filter(|&&i| labels[i] == 1.0).count() as f64;
                (pos / p.len() as f64 - global).abs()
            })
            .fold(0.0, f64::max)
    }
}

pub const DEFAULT_RATIOS: [f64; 3] = [0.70, 0.15, 0.15];

/// Largest-remainder apportionment of `total` across `weights` (summing to 1).
/// Each share is within one unit of `total * weight`.
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = weights.iter().map(|w| w * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().take(total.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}

pub fn stratified_split(ds: &Dataset, ratios: [f64; 3], seed: u64) -> Result<SplitAssignment> {
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::config(format!("split ratios must be nonnegative: {ratios:?}")));
    }
    if (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("split ratios must sum to 1: {ratios:?}")));
    }
    let n = ds.n_rows();
    if n < 3 {
        return Err(Error::data(format!("need at least 3 rows to split, got {n}")));
    }
    let sizes = apportion(n, &ratios);
    let mut rng = seed::rng(seed::derive(seed, seed::STREAM_DATA, 1));

    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| ds.labels()[i] == 1.0);
    let mut parts: [Vec<usize>; 3] = Default::default();
    let (stratified, note) = if pos.is_empty() || neg.is_empty() {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        let mut start = 0;
        for (k, &size) in sizes.iter().enumerate() {
            parts[k] = all[start..start + size].to_vec();
            start += size;
        }
        (
            false,
            Some("one class has no members; fell back to an unstratified split".to_string()),
        )
    } else {
        let shares: Vec<f64> = sizes.iter().map(|&s| s as f64 / n as f64).collect();
        let mut pos_counts = apportion(pos.len(), &shares);
        // a part can never hold more positives than rows
        for k in 0..3 {
            while pos_counts[k] > sizes[k] {
                pos_counts[k] -= 1;
                let j = (0..3)
                    .filter(|&j| pos_counts[j] < sizes[j])
                    .max_by_key(|&j| sizes[j] - pos_counts[j])
                    .ok_or_else(|| Error::Invariant("no room for positive rows".into()))?;
                pos_counts[j] += 1;
            }
        }
        pos.shuffle(&mut rng);
        neg.shuffle(&mut rng);
        let (mut ps, mut ns) = (0, 0);
        for k in 0..3 {
            let np = pos_counts[k];
            let nn = sizes[k] - np;
            parts[k].extend_from_slice(&pos[ps..ps + np]);
            parts[k].extend_from_slice(&neg[ns..ns + nn]);
            ps += np;
            ns += nn;
        }
        (true, None)
    };
    for p in parts.iter_mut() {
        p.sort_unstable();
    }
    let [train, valid, test] = parts;
    Ok(SplitAssignment {
        train,
        valid,
        test,
        stratified,
        note,
    })
}

/// Parameters of the synthetic transaction generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub fraud_rate: f64,
    pub n_features: usize,
    pub difficulty: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// Number of positive rows the generator emits.
    pub fn n_positive(&self) -> usize {
        ((self.n as f64 * self.fraud_rate).round() as usize).clamp(1, self.n)
    }
}

const SIGNAL_BOUND: f64 = 1.5;

fn truncated_normal(rng: &mut seed::Rng, bound: f64) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() < bound {
            return z;
        }
    }
}

/// Generates an imbalanced two-class dataset.
///
/// Negatives are standard normal. Positives are shifted by `3 (1 - difficulty)`
/// along one randomly chosen signal column and by half that along a random
/// unit direction over the remaining columns. On the signal column both
/// classes use a normal truncated to `|z| < 1.5`, so at difficulty 0 the
/// classes are separated by a single threshold, and the overlap grows as the
/// shift shrinks until the classes coincide at difficulty 1.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<Dataset> {
    let SynthSpec {
        n,
        fraud_rate,
        n_features: d,
        difficulty,
        seed: base_seed,
    } = *spec;
    if n == 0 {
        return Err(Error::config("synthetic dataset needs n >= 1"));
    }
    if !(fraud_rate > 0.0 && fraud_rate < 1.0) {
        return Err(Error::config(format!("fraud_rate must lie in (0, 1), got {fraud_rate}")));
    }
    if d == 0 {
        return Err(Error::config("synthetic dataset needs at least one feature"));
    }
    if !(0.0..=1.0).contains(&difficulty) {
        return Err(Error::config(format!("difficulty must lie in [0, 1], got {difficulty}")));
    }
    let mut rng = seed::rng(seed::derive(base_seed, seed::STREAM_DATA, 0));
    let shift = 3.0 * (1.0 - difficulty);
    let signal = rng.random_range(0..d);
    let mut direction: Vec<f64> = (0..d)
        .map(|j| if j == signal { 0.0 } else { rng.sample(StandardNormal) })
        .collect();
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        direction.iter_mut().for_each(|v| *v /= norm);
    }

    let n_pos = spec.n_positive();
    let mut is_pos = vec![false; n];
    for i in rand::seq::index::sample(&mut rng, n, n_pos) {
        is_pos[i] = true;
    }

    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for &positive in &is_pos {
        for (j, &dir) in direction.iter().enumerate() {
            let v = if j == signal {
                let z = truncated_normal(&mut rng, SIGNAL_BOUND);
                if positive {
                    z + shift
                } else {
                    z
                }
            } else {
                let z: f64 = rng.sample(StandardNormal);
                if positive {
                    z + 0.5 * shift * dir
                } else {
                    z
                }
            };
            features.push(v);
        }
        labels.push(if positive { 1.0 } else { 0.0 });
    }
    let names = (0..d).map(|j| format!("x{j}")).collect();
    Dataset::new(features, labels, names)
}
