//! Command pipelines behind the `gbm-ssrf` binary.
//!
//! Each subcommand has a library function that does the work and returns a
//! serializable outcome; [`main_with_args`] only parses flags, runs one of
//! them inside a sized thread pool and renders the result.
//!
//! | command     | function          |
//! |-------------|-------------------|
//! | `train`     | [`cmd_train`]     |
//! | `evaluate`  | [`cmd_evaluate`]  |
//! | `predict`   | [`cmd_predict`]   |
//! | `benchmark` | [`cmd_benchmark`] |
//! | `synth`     | [`cmd_synth`]     |

mod args;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dataset::{
    apply_preprocess, dataset_from_table, fit_preprocess, generate_synthetic, load_csv, stratified_split,
    CsvTable, Dataset, IngestOptions, PreprocessStats, SplitAssignment, SynthSpec, DEFAULT_RATIOS,
};
use crate::error::{Error, Result};
use crate::gbm::fit_gbm;
use crate::hybrid::{fit_hybrid, resolve_threshold, HybridConfig, Setting, ThresholdPolicy};
use crate::metrics::{build_report, ComparisonRow, MetricsReport};
use crate::model_file::{load_model, save_model, Model, ModelFile, ModelPayload, TrainingMetadata};
use crate::ssrf::{fit_plain_rf, fit_ssrf};

pub use args::{main_entry, main_with_args};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Rf,
    Gbm,
    Ssrf,
    #[default]
    Hybrid,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Rf => "rf",
            ModelKind::Gbm => "gbm",
            ModelKind::Ssrf => "ssrf",
            ModelKind::Hybrid => "hybrid",
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rf" => Ok(ModelKind::Rf),
            "gbm" => Ok(ModelKind::Gbm),
            "ssrf" => Ok(ModelKind::Ssrf),
            "hybrid" => Ok(ModelKind::Hybrid),
            other => Err(Error::config(format!("unknown model kind '{other}' (rf|gbm|ssrf|hybrid)"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    File(PathBuf),
    Synth(SynthSpec),
}

/// Everything a train or benchmark run depends on. A JSON config file is
/// merged over the defaults before command-line overrides apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: Option<DataSource>,
    pub label_column: String,
    pub labels: IngestOptions,
    pub kind: ModelKind,
    /// Hyperparameters; the member configs serve the single-model kinds too.
    pub model: HybridConfig,
    pub ratios: [f64; 3],
    pub seed: u64,
    /// Truncate GBM to the stage count with the lowest validation loss.
    pub early_stopping: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            label_column: "label".into(),
            labels: IngestOptions::default(),
            kind: ModelKind::Hybrid,
            model: HybridConfig::default(),
            ratios: DEFAULT_RATIOS,
            seed: 0,
            early_stopping: false,
        }
    }
}

fn merge_json(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge_json(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

impl RunConfig {
    /// Defaults overlaid with a (possibly partial) JSON document.
    pub fn from_json_overlay(text: &str) -> Result<Self> {
        let patch: Value =
            serde_json::from_str(text).map_err(|e| Error::config(format!("config file is not JSON: {e}")))?;
        let mut base = serde_json::to_value(RunConfig::default()).map_err(|e| Error::Invariant(e.to_string()))?;
        merge_json(&mut base, patch);
        serde_json::from_value(base).map_err(|e| Error::config(format!("config file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_overlay(&text)
    }

    /// Copy with the run seed pushed into every component.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.seed = seed;
        c.model.seed = seed;
        c.model.gbm.seed = seed;
        c.model.ssrf.seed = seed;
        c
    }
}

pub fn load_data(cfg: &RunConfig) -> Result<Dataset> {
    match &cfg.data {
        Some(DataSource::File(path)) => load_csv(path, &cfg.label_column, &cfg.labels),
        Some(DataSource::Synth(spec)) => generate_synthetic(spec),
        None => Err(Error::config("no dataset given: pass --data <csv> or --synth n,rate,features,difficulty")),
    }
}

/// Split, then z-score with statistics from the training rows only.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub raw: Dataset,
    pub data: Dataset,
    pub split: SplitAssignment,
    pub stats: PreprocessStats,
}

pub fn prepare(raw: Dataset, ratios: [f64; 3], seed: u64) -> Result<Prepared> {
    let split = stratified_split(&raw, ratios, seed)?;
    let stats = fit_preprocess(&raw, &split.train)?;
    let data = apply_preprocess(&raw, &stats)?;
    Ok(Prepared {
        raw,
        data,
        split,
        stats,
    })
}

/// A fitted model with its decision threshold and the configuration that
/// produced it, with every `auto` replaced by the chosen value.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub model: Model,
    pub threshold: f64,
    pub resolved: RunConfig,
}

fn rows_scores(model: &Model, ds: &Dataset, rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&i| model.score(ds.row(i))).collect()
}

fn rows_labels(ds: &Dataset, rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&i| ds.labels()[i]).collect()
}

fn choose_threshold(setting: Setting, model: &Model, ds: &Dataset, split: &SplitAssignment) -> Result<f64> {
    match setting {
        Setting::Fixed(t) if t > 0.0 && t < 1.0 => Ok(t),
        Setting::Fixed(t) => Err(Error::config(format!("threshold must lie in (0, 1), got {t}"))),
        Setting::Auto => {
            if split.valid.is_empty() {
                return Err(Error::data("threshold 'auto' needs a nonempty validation split"));
            }
            resolve_threshold(
                &rows_scores(model, ds, &split.valid),
                &rows_labels(ds, &split.valid),
                ThresholdPolicy::MaxF1,
            )
        }
    }
}

/// Fits one model kind on the training rows of an already preprocessed
/// dataset and resolves its threshold on the validation rows.
pub fn fit_kind(kind: ModelKind, ds: &Dataset, split: &SplitAssignment, cfg: &RunConfig) -> Result<Fitted> {
    let mut resolved = cfg.with_seed(cfg.seed);
    resolved.kind = kind;
    let mc = &resolved.model;
    let labels = ds.labels();
    let model = match kind {
        ModelKind::Rf => Model::Rf(fit_plain_rf(ds, &split.train, labels, &mc.ssrf)?),
        ModelKind::Ssrf => Model::Ssrf(fit_ssrf(ds, &split.train, labels, &mc.ssrf)?),
        ModelKind::Gbm => {
            let mut m = fit_gbm(ds, &split.train, labels, &mc.gbm)?;
            if cfg.early_stopping && !split.valid.is_empty() {
                let keep = m.best_prefix(ds, &split.valid);
                m.truncate(keep);
                resolved.model.gbm.n_stages = keep;
            }
            Model::Gbm(m)
        }
        ModelKind::Hybrid => Model::Hybrid(fit_hybrid(ds, split, mc)?),
    };
    let threshold = match &model {
        Model::Hybrid(h) => {
            resolved.model.alpha = Setting::Fixed(h.alpha);
            h.threshold
        }
        other => {
            // the blend weight that reproduces this single member
            let alpha = if kind == ModelKind::Gbm { 0.0 } else { 1.0 };
            resolved.model.alpha = Setting::Fixed(alpha);
            choose_threshold(resolved.model.threshold, other, ds, split)?
        }
    };
    if kind == ModelKind::Rf {
        resolved.model.ssrf.importance_blend = 0.0;
        resolved.model.ssrf.pilot_trees = 0;
    }
    resolved.model.threshold = Setting::Fixed(threshold);
    Ok(Fitted {
        model,
        threshold,
        resolved,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainOutcome {
    pub model_kind: ModelKind,
    pub model_path: PathBuf,
    pub threshold: f64,
    pub config: RunConfig,
    pub validation: Option<MetricsReport>,
    #[serde(skip)]
    pub file: ModelFile,
}

/// Load, split, preprocess, fit, resolve alpha and threshold, save.
pub fn cmd_train(cfg: &RunConfig, model_out: &Path) -> Result<TrainOutcome> {
    let cfg = cfg.with_seed(cfg.seed);
    let prepared = prepare(load_data(&cfg)?, cfg.ratios, cfg.seed)?;
    let fitted = fit_kind(cfg.kind, &prepared.data, &prepared.split, &cfg)?;
    let ds = &prepared.data;
    let valid = &prepared.split.valid;
    let validation = if valid.is_empty() {
        None
    } else {
        Some(build_report(
            &rows_labels(ds, valid),
            &rows_scores(&fitted.model, ds, valid),
            fitted.threshold,
        )?)
    };
    let metadata = TrainingMetadata {
        seed: cfg.seed,
        dataset_fingerprint: prepared.raw.fingerprint(),
        n_rows: prepared.raw.n_rows(),
        config: serde_json::to_value(&fitted.resolved).map_err(|e| Error::Invariant(e.to_string()))?,
    };
    let file = ModelFile::new(ModelPayload {
        model: fitted.model,
        threshold: fitted.threshold,
        feature_names: prepared.raw.feature_names().to_vec(),
        label_column: cfg.label_column.clone(),
        labels: cfg.labels.clone(),
        preprocess: prepared.stats,
        split: prepared.split,
        metadata,
    });
    save_model(model_out, &file)?;
    Ok(TrainOutcome {
        model_kind: cfg.kind,
        model_path: model_out.to_path_buf(),
        threshold: fitted.threshold,
        config: fitted.resolved,
        validation,
        file,
    })
}

/// Errors unless the table's columns are exactly the model's features plus,
/// optionally, the label column.
pub fn check_schema(headers: &[String], features: &[String], label_column: &str) -> Result<()> {
    let missing: Vec<&str> = features
        .iter()
        .filter(|f| !headers.contains(f))
        .map(String::as_str)
        .collect();
    let extra: Vec<&str> = headers
        .iter()
        .filter(|h| !features.contains(h) && h.as_str() != label_column)
        .map(String::as_str)
        .collect();
    if missing.is_empty() && extra.is_empty() {
        return Ok(());
    }
    Err(Error::data(format!(
        "columns do not match the model's features; missing: {missing:?}; extra: {extra:?}"
    )))
}

/// Probabilities for every row of `table`, preprocessed with the stored stats.
pub fn score_table(file: &ModelFile, table: &CsvTable, label_column: Option<&str>) -> Result<(Dataset, Vec<f64>)> {
    let p = &file.payload;
    check_schema(&table.headers, &p.feature_names, &p.label_column)?;
    let ds = dataset_from_table(table, &p.feature_names, label_column, &p.labels)?;
    let ready = apply_preprocess(&ds, &p.preprocess)?;
    let scores = (0..ready.n_rows()).map(|i| file.score(ready.row(i))).collect();
    Ok((ds, scores))
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluateOutcome {
    pub model_kind: String,
    pub n_rows: usize,
    pub report: MetricsReport,
}

pub fn cmd_evaluate(model_path: &Path, data_path: &Path, label_column: Option<&str>) -> Result<EvaluateOutcome> {
    let file = load_model(model_path)?;
    let table = CsvTable::read(data_path)?;
    let label = label_column.unwrap_or(&file.payload.label_column).to_string();
    if table.column_index(&label).is_none() {
        return Err(Error::data(format!(
            "{}: label column '{label}' not found",
            data_path.display()
        )));
    }
    let mut file = file;
    file.payload.label_column = label.clone();
    let (ds, scores) = score_table(&file, &table, Some(&label))?;
    Ok(EvaluateOutcome {
        model_kind: file.payload.model.kind().to_string(),
        n_rows: ds.n_rows(),
        report: build_report(ds.labels(), &scores, file.payload.threshold)?,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictOutcome {
    pub rows: usize,
    pub threshold: f64,
    pub out: PathBuf,
}

/// Writes the input columns followed by `score` and `flag`.
pub fn cmd_predict(model_path: &Path, data_path: &Path, out: &Path) -> Result<PredictOutcome> {
    let file = load_model(model_path)?;
    let table = CsvTable::read(data_path)?;
    let (_, scores) = score_table(&file, &table, None)?;
    let threshold = file.payload.threshold;
    let mut w = csv::Writer::from_path(out).map_err(|e| csv_error(out, e))?;
    let mut header = table.headers.clone();
    header.extend(["score".to_string(), "flag".to_string()]);
    w.write_record(&header).map_err(|e| csv_error(out, e))?;
    for (rec, &s) in table.records.iter().zip(&scores) {
        let mut row = rec.clone();
        row.push(s.to_string());
        row.push(if s > threshold { "1" } else { "0" }.to_string());
        w.write_record(&row).map_err(|e| csv_error(out, e))?;
    }
    w.flush().map_err(|e| Error::io(out, e))?;
    Ok(PredictOutcome {
        rows: scores.len(),
        threshold,
        out: out.to_path_buf(),
    })
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::data(format!("{}: {other:?}", path.display())),
    }
}

pub const BENCHMARK_MODELS: [(&str, ModelKind); 3] =
    [("RF", ModelKind::Rf), ("GBM", ModelKind::Gbm), ("GBM-SSRF", ModelKind::Hybrid)];

#[derive(Debug, Clone, Serialize)]
pub struct SeedRun {
    pub seed: u64,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkOutcome {
    pub config: RunConfig,
    pub seeds: Vec<u64>,
    /// Means over seeds, in the order RF, GBM, GBM-SSRF, then external rows.
    pub rows: Vec<ComparisonRow>,
    pub per_seed: Vec<SeedRun>,
}

fn test_report(fitted: &Fitted, prepared: &Prepared) -> Result<MetricsReport> {
    let ds = &prepared.data;
    let test = &prepared.split.test;
    build_report(
        &rows_labels(ds, test),
        &rows_scores(&fitted.model, ds, test),
        fitted.threshold,
    )
}

fn mean_option(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = values.collect();
    let v = v?;
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn mean_row(name: &str, runs: &[&ComparisonRow]) -> ComparisonRow {
    if let Some(err) = runs.iter().find_map(|r| r.error.clone()) {
        return ComparisonRow::failed(name, err);
    }
    ComparisonRow {
        model: name.to_string(),
        accuracy: mean_option(runs.iter().map(|r| r.accuracy)),
        precision: mean_option(runs.iter().map(|r| r.precision)),
        recall: mean_option(runs.iter().map(|r| r.recall)),
        f1: mean_option(runs.iter().map(|r| r.f1)),
        auc_roc: mean_option(runs.iter().map(|r| r.auc_roc)),
        error: None,
    }
}

/// RF, GBM and GBM-SSRF on a shared split per seed, scored on the test rows.
/// Synthetic data is regenerated for each seed. A model that fails becomes an
/// error row; the others still run.
pub fn cmd_benchmark(cfg: &RunConfig, seeds: &[u64], external: Vec<ComparisonRow>) -> Result<BenchmarkOutcome> {
    if seeds.is_empty() {
        return Err(Error::config("benchmark needs at least one seed"));
    }
    let mut per_seed = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut run_cfg = cfg.with_seed(seed);
        if let Some(DataSource::Synth(spec)) = &mut run_cfg.data {
            spec.seed = seed;
        }
        let prepared = prepare(load_data(&run_cfg)?, run_cfg.ratios, seed)?;
        let rows = BENCHMARK_MODELS
            .iter()
            .map(|&(name, kind)| {
                match fit_kind(kind, &prepared.data, &prepared.split, &run_cfg)
                    .and_then(|f| test_report(&f, &prepared))
                {
                    Ok(r) => ComparisonRow::from_report(name, &r),
                    Err(e) => ComparisonRow::failed(name, e.to_string()),
                }
            })
            .collect();
        per_seed.push(SeedRun { seed, rows });
    }
    let mut rows: Vec<ComparisonRow> = BENCHMARK_MODELS
        .iter()
        .enumerate()
        .map(|(j, &(name, _))| {
            let runs: Vec<&ComparisonRow> = per_seed.iter().map(|s| &s.rows[j]).collect();
            mean_row(name, &runs)
        })
        .collect();
    rows.extend(external);
    Ok(BenchmarkOutcome {
        config: cfg.with_seed(seeds[0]),
        seeds: seeds.to_vec(),
        rows,
        per_seed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthOutcome {
    pub rows: usize,
    pub positives: usize,
    pub out: PathBuf,
}

pub fn cmd_synth(spec: &SynthSpec, label_column: &str, out: &Path) -> Result<SynthOutcome> {
    let ds = generate_synthetic(spec)?;
    ds.write_csv(out, label_column)?;
    Ok(SynthOutcome {
        rows: ds.n_rows(),
        positives: ds.n_positive(),
        out: out.to_path_buf(),
    })
}

/// Parses `n,rate,features,difficulty`.
pub fn parse_synth_spec(s: &str, seed: u64) -> Result<SynthSpec> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || Error::config(format!("expected n,rate,features,difficulty, got '{s}'"));
    if parts.len() != 4 {
        return Err(bad());
    }
    Ok(SynthSpec {
        n: parts[0].parse().map_err(|_| bad())?,
        fraud_rate: parts[1].parse().map_err(|_| bad())?,
        n_features: parts[2].parse().map_err(|_| bad())?,
        difficulty: parts[3].parse().map_err(|_| bad())?,
        seed,
    })
}

/// Parses `train,valid,test`.
pub fn parse_ratios(s: &str) -> Result<[f64; 3]> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::config(format!("ratios must be three numbers, got '{s}'")))?;
    <[f64; 3]>::try_from(v).map_err(|_| Error::config(format!("ratios must be three numbers, got '{s}'")))
}
