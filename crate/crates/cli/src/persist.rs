//! Versioned JSON files: trained models, feature manifests and SMOTE
//! provenance. Floats are written in shortest round-trip form and parsed
//! back exactly, so a reloaded model predicts bit for bit what it did
//! before saving.

use std::fs;
use std::path::Path;

use hmdim_core::features::{FeatureColumn, FeatureConfig, StandardizationParams};
use hmdim_core::models::{Model, Probabilities};
use hmdim_core::resample::SyntheticSample;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, json_err, CliError, Result, StageExt};

pub const MODEL_FORMAT: &str = "hmdim-model";
pub const FORMAT_VERSION: u32 = 1;

/// A model plus what is needed to feed it raw feature rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub format_version: u32,
    /// How descriptor files are featurized before `feature_names` are picked.
    pub features: FeatureConfig,
    pub feature_names: Vec<String>,
    /// Applied to raw rows before the model sees them.
    pub standardization: Option<StandardizationParams>,
    pub seed: u64,
    pub model: Model,
}

impl ModelFile {
    pub fn new(
        model: Model,
        features: FeatureConfig,
        feature_names: Vec<String>,
        standardization: Option<StandardizationParams>,
        seed: u64,
    ) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            format_version: FORMAT_VERSION,
            features,
            feature_names,
            standardization,
            seed,
            model,
        }
    }

    /// Probabilities for one raw (unstandardized) feature row.
    pub fn predict_proba(&self, row: &[f64]) -> Result<Probabilities> {
        match &self.standardization {
            Some(s) => self.model.predict_proba(&s.apply_row(row).stage("predict")?),
            None => self.model.predict_proba(row),
        }
        .stage("predict")
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

pub fn save_model(path: &Path, model: &ModelFile) -> Result<()> {
    let text = model.to_json().map_err(json_err(path))?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let m = ModelFile::from_json(&text).map_err(json_err(path))?;
    if m.format != MODEL_FORMAT || m.format_version != FORMAT_VERSION {
        return Err(CliError::Input {
            path: path.into(),
            reason: format!(
                "unsupported model file {} v{} (expected {MODEL_FORMAT} v{FORMAT_VERSION})",
                m.format, m.format_version
            ),
        });
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureManifest {
    pub format_version: u32,
    pub columns: Vec<FeatureColumn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceRow {
    /// Row of the augmented output.
    pub row: usize,
    #[serde(flatten)]
    pub sample: SyntheticSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoteProvenance {
    pub format_version: u32,
    pub seed: u64,
    pub k_neighbors: usize,
    pub original_rows: usize,
    pub synthetic: Vec<ProvenanceRow>,
}

impl SmoteProvenance {
    pub fn new(seed: u64, k_neighbors: usize, original_rows: usize, synthetic: &[SyntheticSample]) -> Self {
        let synthetic = synthetic
            .iter()
            .enumerate()
            .map(|(j, s)| ProvenanceRow { row: original_rows + j, sample: s.clone() })
            .collect();
        Self { format_version: FORMAT_VERSION, seed, k_neighbors, original_rows, synthetic }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(json_err(path))?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(json_err(path))
}
