//! Structured-text checkpoints of named parameter tensors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::optim::OptimizerState;
use super::params::ParamSet;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    /// Free-form description of what the tensors belong to.
    pub meta: serde_json::Value,
    pub tensors: Vec<TensorRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerState>,
}

impl Checkpoint {
    pub fn capture(params: &ParamSet, meta: serde_json::Value, optimizer: Option<OptimizerState>) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            meta,
            tensors: params
                .tensors()
                .iter()
                .map(|t| TensorRecord { name: t.name.clone(), rows: t.rows, cols: t.cols, values: t.values.clone() })
                .collect(),
            optimizer,
        }
    }

    /// Copies values into `params`, which must have exactly the same names and shapes.
    pub fn restore_into(&self, params: &mut ParamSet) -> Result<()> {
        if self.tensors.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} tensors, model expects {}",
                self.tensors.len(),
                params.len()
            )));
        }
        for (rec, t) in self.tensors.iter().zip(params.tensors()) {
            if rec.name != t.name {
                return Err(Error::Checkpoint(format!("tensor `{}` found where `{}` was expected", rec.name, t.name)));
            }
            if (rec.rows, rec.cols) != (t.rows, t.cols) || rec.values.len() != t.len() {
                return Err(Error::Checkpoint(format!(
                    "tensor `{}` is {}x{} in the checkpoint but {}x{} in the model",
                    rec.name, rec.rows, rec.cols, t.rows, t.cols
                )));
            }
            if rec.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Checkpoint(format!("tensor `{}` holds non-finite values", rec.name)));
            }
        }
        for (rec, t) in self.tensors.iter().zip(params.tensors_mut()) {
            t.values.copy_from_slice(&rec.values);
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(s)?;
        if c.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::FormatVersion { what: "checkpoint", found: c.format_version, expected: CHECKPOINT_FORMAT_VERSION });
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s).map_err(|e| match e {
            Error::Json(j) => Error::parse(path, j.to_string()),
            other => other,
        })
    }
}
