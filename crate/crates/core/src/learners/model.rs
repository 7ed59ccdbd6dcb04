use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{train_gbdt, train_linear_margin, GbdtConfig, GbdtModel, LinearConfig, LinearModel, TrainingSet};
use crate::error::{Error, Result};
use crate::learners::Matrix;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LearnerSpec {
    Gbdt(GbdtConfig),
    LinearMargin(LinearConfig),
}

impl LearnerSpec {
    pub fn class_weight_override(&self) -> Option<f64> {
        match self {
            LearnerSpec::Gbdt(c) => c.class_weight_pos,
            LearnerSpec::LinearMargin(c) => c.class_weight_pos,
        }
    }

    /// Trains on window rows with positive weight `max(1, negatives /
    /// positives)` unless the configuration fixes it.
    pub fn train(&self, data: &TrainingSet, seed: u64) -> Result<TrainedModel> {
        let pos_w = match self.class_weight_override() {
            Some(w) => w,
            None => auto_pos_weight(&data.y),
        };
        let w: Vec<f64> = data.y.iter().map(|&c| if c == 1 { pos_w } else { 1.0 }).collect();
        let params = match self {
            LearnerSpec::Gbdt(cfg) => ModelParams::Gbdt(train_gbdt(&data.x, &data.y, &w, cfg, seed)?),
            LearnerSpec::LinearMargin(cfg) => {
                ModelParams::LinearMargin(train_linear_margin(&data.x, &data.y, &w, cfg, seed)?)
            }
        };
        let raw: Vec<f64> = match &params {
            ModelParams::Gbdt(m) => m.gain.clone(),
            ModelParams::LinearMargin(m) => m.weights.iter().map(|w| w.abs()).collect(),
        };
        let total: f64 = raw.iter().sum();
        let importance = data
            .registry
            .iter()
            .zip(&raw)
            .map(|(name, &v)| (name.clone(), if total > 0.0 { 100.0 * v / total } else { 0.0 }))
            .collect();
        Ok(TrainedModel {
            format_version: MODEL_FORMAT_VERSION,
            registry: data.registry.clone(),
            class_weight_pos: pos_w,
            importance,
            params,
        })
    }
}

/// `negatives / positives`, floored at 1.
pub fn auto_pos_weight(y: &[u8]) -> f64 {
    let pos = y.iter().filter(|&&c| c == 1).count();
    let neg = y.len() - pos;
    if pos == 0 {
        1.0
    } else {
        (neg as f64 / pos as f64).max(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gbdt,
    LinearMargin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Gbdt(GbdtModel),
    LinearMargin(LinearModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainedModel {
    pub format_version: u32,
    pub registry: Vec<String>,
    pub class_weight_pos: f64,
    /// Share of total split gain (trees) or of summed |weight| (linear), in percent.
    pub importance: BTreeMap<String, f64>,
    pub params: ModelParams,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self.params {
            ModelParams::Gbdt(_) => ModelKind::Gbdt,
            ModelParams::LinearMargin(_) => ModelKind::LinearMargin,
        }
    }

    /// Win probabilities in `[1e-15, 1 - 1e-15]`; `registry` must equal the
    /// training registry.
    pub fn predict_proba(&self, x: &Matrix, registry: &[String]) -> Result<Vec<f64>> {
        if registry != self.registry.as_slice() || x.cols() != self.registry.len() {
            return Err(Error::invalid(format!(
                "feature registry mismatch: model expects {:?}, got {:?}",
                self.registry, registry
            )));
        }
        let p = match &self.params {
            ModelParams::Gbdt(m) => m.predict_proba(x),
            ModelParams::LinearMargin(m) => m.predict_proba(x),
        };
        Ok(p.into_iter().map(|v| v.clamp(1e-15, 1.0 - 1e-15)).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::invalid(format!("serialising model: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: TrainedModel =
            serde_json::from_str(text).map_err(|e| Error::data(format!("reading model: {e}")))?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::data(format!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                m.format_version
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::stats::write_file(path, &self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Features ranked by importance, largest first; ties keep registry order.
pub fn feature_importance(model: &TrainedModel) -> Vec<(String, f64)> {
    let mut ranked: Vec<(String, f64)> = model
        .registry
        .iter()
        .map(|f| (f.clone(), model.importance.get(f).copied().unwrap_or(0.0)))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    ranked
}
