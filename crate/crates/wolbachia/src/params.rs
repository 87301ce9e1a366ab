//! Parameter files, presets and hashing.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wolbachia_core::{validate_params, ModelParameters};

use crate::error::{AppError, AppResult};

/// Parameters given inline or by preset name.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamSource {
    Preset(String),
    Inline(ModelParameters),
}

impl ParamSource {
    pub fn resolve(&self) -> AppResult<ModelParameters> {
        match self {
            ParamSource::Preset(name) => preset(name),
            ParamSource::Inline(p) => Ok(*p),
        }
    }
}

impl Default for ParamSource {
    fn default() -> Self {
        ParamSource::Preset("wmelpop".into())
    }
}

pub const PRESETS: &[&str] = &["wmelpop"];

pub fn preset(name: &str) -> AppResult<ModelParameters> {
    match name.to_ascii_lowercase().as_str() {
        "wmelpop" => Ok(ModelParameters::WMELPOP),
        other => Err(AppError::Input(format!(
            "unknown preset {other:?} (known: {})",
            PRESETS.join(", ")
        ))),
    }
}

pub fn from_json(text: &str) -> AppResult<ModelParameters> {
    serde_json::from_str(text).map_err(|e| AppError::Input(format!("parameter file: {e}")))
}

pub fn load(path: &Path) -> AppResult<ModelParameters> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::Input(format!("{}: {e}", path.display())))?;
    from_json(&text)
}

/// Rejects parameters that break positivity or survival. Coexistence is only
/// required when `need_saddle` is set.
pub fn check(p: &ModelParameters, need_saddle: bool) -> AppResult<()> {
    let report = validate_params(p);
    let ok = if need_saddle { report.all_hold() } else { report.in_scope() };
    if ok {
        return Ok(());
    }
    let mut violated = report.violated();
    if !need_saddle {
        violated.retain(|c| *c != wolbachia_core::Condition::Coexistence);
    }
    let names: Vec<String> = violated
        .iter()
        .map(|c| serde_json::to_value(c).unwrap().as_str().unwrap().to_owned())
        .collect();
    Err(AppError::Validation {
        message: format!("parameters violate: {}", names.join(", ")),
        violated,
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of the parameter values in a fixed field order.
pub fn hash(p: &ModelParameters) -> String {
    sha256_hex(serde_json::to_string(p).unwrap().as_bytes())
}
