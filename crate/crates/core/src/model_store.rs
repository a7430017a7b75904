//! Versioned JSON model files.
//!
//! Keys appear in struct declaration order and floats use shortest
//! round-trip decimal encoding, so save → load → save is byte-identical.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anomaly::MotionModel;
use crate::regime::DensityRegime;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelStoreError {
    #[error("model set is empty")]
    EmptyModelSet,
    #[error("unsupported model file version {found} (this build reads {FORMAT_VERSION})")]
    VersionMismatch { found: u64 },
    #[error("model file schema error: {0}")]
    SchemaError(String),
    #[error("model invariant violated: {0}")]
    InvariantViolation(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Inputs that determine a training run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingFingerprint {
    pub seed: u64,
    pub k_range: [usize; 2],
    pub restarts: usize,
    pub observation_counts: BTreeMap<DensityRegime, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub fingerprint: TrainingFingerprint,
    pub models: Vec<MotionModel>,
}

impl ModelFile {
    pub fn new(models: Vec<MotionModel>, fingerprint: TrainingFingerprint) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            fingerprint,
            models,
        }
    }

    pub fn model_for(&self, regime: DensityRegime) -> Option<&MotionModel> {
        self.models.iter().find(|m| m.regime == regime)
    }

    pub fn validate(&self) -> Result<(), ModelStoreError> {
        if self.models.is_empty() {
            return Err(ModelStoreError::EmptyModelSet);
        }
        let mut regimes: Vec<_> = self.models.iter().map(|m| m.regime).collect();
        regimes.sort();
        regimes.dedup();
        if regimes.len() != self.models.len() {
            return Err(ModelStoreError::InvariantViolation("duplicate regime".into()));
        }
        for m in &self.models {
            m.validate()
                .map_err(|e| ModelStoreError::InvariantViolation(format!("{} model: {e}", m.regime)))?;
        }
        Ok(())
    }
}

pub fn save_model<W: Write>(file: &ModelFile, mut sink: W) -> Result<(), ModelStoreError> {
    file.validate()?;
    serde_json::to_writer_pretty(&mut sink, file).map_err(|e| ModelStoreError::SchemaError(e.to_string()))?;
    sink.write_all(b"\n")?;
    sink.flush()?;
    Ok(())
}

pub fn load_model<R: Read>(mut source: R) -> Result<ModelFile, ModelStoreError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| ModelStoreError::SchemaError(e.to_string()))?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| ModelStoreError::SchemaError("missing format_version".into()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(ModelStoreError::VersionMismatch { found: version });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| ModelStoreError::SchemaError(e.to_string()))?;
    file.validate()?;
    Ok(file)
}

pub fn save_model_file(file: &ModelFile, path: impl AsRef<Path>) -> Result<(), ModelStoreError> {
    save_model(file, BufWriter::new(File::create(path)?))
}

pub fn load_model_file(path: impl AsRef<Path>) -> Result<ModelFile, ModelStoreError> {
    load_model(BufReader::new(File::open(path)?))
}
