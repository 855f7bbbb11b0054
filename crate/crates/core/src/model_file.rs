//! Checksummed JSON model files.
//!
//! On disk a model is an envelope
//!
//! ```text
//! {"schema_version": 1, "created_at": <unix secs>, "checksum": "<sha256 hex>", "payload": {...}}
//! ```
//!
//! where the checksum covers the exact payload bytes. Everything needed to
//! score new data lives in the payload: the fitted model, decision threshold,
//! feature names, label mapping, preprocessing stats, the split used for
//! training and the resolved run configuration. The creation timestamp sits
//! outside the payload so that identical runs produce identical payloads.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use crate::dataset::{IngestOptions, PreprocessStats, SplitAssignment};
use crate::error::{Error, Result};
use crate::gbm::GbmModel;
use crate::hybrid::HybridModel;
use crate::ssrf::{check_width, SsrfModel};

pub const SCHEMA_VERSION: u32 = 1;
pub const SUPPORTED_VERSIONS: &[u32] = &[1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "lowercase")]
pub enum Model {
    Rf(SsrfModel),
    Gbm(GbmModel),
    Ssrf(SsrfModel),
    Hybrid(HybridModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Rf(_) => "rf",
            Model::Gbm(_) => "gbm",
            Model::Ssrf(_) => "ssrf",
            Model::Hybrid(_) => "hybrid",
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Model::Rf(m) | Model::Ssrf(m) => m.n_features,
            Model::Gbm(m) => m.n_features,
            Model::Hybrid(m) => m.n_features(),
        }
    }

    /// Probability of the positive class, unchecked width.
    pub fn score(&self, x: &[f64]) -> f64 {
        match self {
            Model::Rf(m) | Model::Ssrf(m) => m.score(x),
            Model::Gbm(m) => m.probability(x),
            Model::Hybrid(m) => m.score(x),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_width(x, self.n_features())?;
        Ok(self.score(x))
    }

    pub fn importance(&self) -> Vec<f64> {
        match self {
            Model::Rf(m) | Model::Ssrf(m) => m.importance.clone(),
            Model::Gbm(m) => m.importance(),
            Model::Hybrid(m) => m.importance.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub dataset_fingerprint: String,
    pub n_rows: usize,
    /// Fully resolved run configuration.
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPayload {
    #[serde(flatten)]
    pub model: Model,
    pub threshold: f64,
    pub feature_names: Vec<String>,
    pub label_column: String,
    pub labels: IngestOptions,
    pub preprocess: PreprocessStats,
    pub split: SplitAssignment,
    pub metadata: TrainingMetadata,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub schema_version: u32,
    pub created_at: u64,
    pub payload: ModelPayload,
}

impl ModelFile {
    pub fn new(payload: ModelPayload) -> Self {
        let created_at = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        ModelFile {
            schema_version: SCHEMA_VERSION,
            created_at,
            payload,
        }
    }

    /// Scores a row that has already been preprocessed.
    pub fn score(&self, x: &[f64]) -> f64 {
        self.payload.model.score(x)
    }
}

#[derive(Serialize)]
struct EnvelopeOut<'a> {
    schema_version: u32,
    created_at: u64,
    checksum: String,
    payload: &'a RawValue,
}

#[derive(Deserialize)]
struct EnvelopeIn<'a> {
    schema_version: u32,
    #[serde(default)]
    created_at: u64,
    checksum: String,
    #[serde(borrow)]
    payload: &'a RawValue,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Serialized payload text, as it would be written to disk.
pub fn payload_json(payload: &ModelPayload) -> Result<String> {
    serde_json::to_string(payload).map_err(|e| Error::Invariant(format!("serialize model: {e}")))
}

fn temp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}

/// Writes atomically: a sibling temp file renamed into place.
pub fn save_model(path: &Path, file: &ModelFile) -> Result<()> {
    let payload = payload_json(&file.payload)?;
    let raw = RawValue::from_string(payload).map_err(|e| Error::Invariant(e.to_string()))?;
    let envelope = EnvelopeOut {
        schema_version: file.schema_version,
        created_at: file.created_at,
        checksum: sha256_hex(raw.get().as_bytes()),
        payload: &raw,
    };
    let text = serde_json::to_string(&envelope).map_err(|e| Error::Invariant(e.to_string()))?;
    let tmp = temp_sibling(path);
    let result = std::fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(text.as_bytes())?;
            f.sync_all()
        })
        .and_then(|_| std::fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text)
}

pub fn parse_model(text: &str) -> Result<ModelFile> {
    let envelope: EnvelopeIn<'_> = serde_json::from_str(text).map_err(|e| {
        Error::ModelFile(format!(
            "checksum verification failed: file is truncated or not a model envelope ({e})"
        ))
    })?;
    if !SUPPORTED_VERSIONS.contains(&envelope.schema_version) {
        return Err(Error::ModelFile(format!(
            "unsupported schema_version {}; supported versions: {:?}",
            envelope.schema_version, SUPPORTED_VERSIONS
        )));
    }
    let actual = sha256_hex(envelope.payload.get().as_bytes());
    if actual != envelope.checksum {
        return Err(Error::ModelFile(format!(
            "checksum mismatch: stored {}, computed {actual}",
            envelope.checksum
        )));
    }
    let mut de = serde_json::Deserializer::from_str(envelope.payload.get());
    de.disable_recursion_limit();
    let payload = ModelPayload::deserialize(&mut de)
        .map_err(|e| Error::ModelFile(format!("payload does not match schema: {e}")))?;
    Ok(ModelFile {
        schema_version: envelope.schema_version,
        created_at: envelope.created_at,
        payload,
    })
}
