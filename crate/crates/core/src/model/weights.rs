//! Versioned JSON weight document.
//!
//! Floats are written in shortest round-trip form and parsed with correct
//! rounding, so save → load reproduces every weight bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelParameters, Variant};
use crate::data::NormalizationStats;
use crate::error::{Error, Result};
use crate::io_util::write_atomic_bytes;

pub const WEIGHT_FORMAT: &str = "madcnn-weights";
pub const WEIGHT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightFile {
    pub format: String,
    pub version: u32,
    pub variant: Variant,
    pub config: ModelConfig,
    pub seed: u64,
    /// Training-split statistics the model expects its inputs normalized with.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<NormalizationStats>,
    pub tensors: Vec<TensorRecord>,
}

impl WeightFile {
    pub fn from_model(params: &ModelParameters, normalization: Option<NormalizationStats>) -> Result<Self> {
        Ok(Self {
            format: WEIGHT_FORMAT.into(),
            version: WEIGHT_FORMAT_VERSION,
            variant: params.config.variant()?,
            config: params.config,
            seed: params.seed,
            normalization,
            tensors: params
                .tensors()
                .into_iter()
                .map(|t| TensorRecord {
                    name: t.name,
                    shape: t.shape,
                    values: t.values.to_vec(),
                })
                .collect(),
        })
    }

    pub fn into_model(self) -> Result<(ModelParameters, Option<NormalizationStats>)> {
        if self.format != WEIGHT_FORMAT {
            return Err(Error::Format(format!("not a weight file (format `{}`)", self.format)));
        }
        if self.version != WEIGHT_FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported weight file version {}", self.version)));
        }
        if self.config.variant()? != self.variant {
            return Err(Error::Format("variant does not match config flags".into()));
        }
        let mut params = ModelParameters::zeros(self.config)?;
        params.seed = self.seed;
        let expected: Vec<(String, Vec<usize>)> =
            params.tensors().into_iter().map(|t| (t.name, t.shape)).collect();
        if expected.len() != self.tensors.len() {
            return Err(Error::Format(format!(
                "expected {} tensors, file has {}",
                expected.len(),
                self.tensors.len()
            )));
        }
        for ((slot, (name, shape)), rec) in params.tensors_mut().into_iter().zip(expected).zip(&self.tensors) {
            if rec.name != name || rec.shape != shape {
                return Err(Error::Format(format!(
                    "tensor `{}` {:?} where `{name}` {shape:?} was expected",
                    rec.name, rec.shape
                )));
            }
            if rec.values.len() != slot.len() {
                return Err(Error::Format(format!("tensor `{name}` has {} values", rec.values.len())));
            }
            slot.copy_from_slice(&rec.values);
        }
        params.ensure_finite()?;
        Ok((params, self.normalization))
    }
}

/// Serialized weight file contents.
pub fn weights_to_bytes(params: &ModelParameters, normalization: Option<NormalizationStats>) -> Result<Vec<u8>> {
    let doc = WeightFile::from_model(params, normalization)?;
    let mut bytes = serde_json::to_vec_pretty(&doc).map_err(|e| Error::Format(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn save_weights(path: &Path, params: &ModelParameters, normalization: Option<NormalizationStats>) -> Result<()> {
    write_atomic_bytes(path, &weights_to_bytes(params, normalization)?)
}

pub fn load_weights(path: &Path) -> Result<(ModelParameters, Option<NormalizationStats>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: WeightFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    doc.into_model()
}
