use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExtractConfig;
use crate::cardiac::FINAL_CARDIAC_FEATURES;
use crate::error::{Error, Result};
use crate::fusion::{GridSpec, LosoConfig, Target};
use crate::learners::{GbdtConfig, LearnerSpec};
use crate::model::{Modality, Phase};
use crate::ocular::FINAL_OCULAR_FEATURES;

pub const CONFIG_VERSION: u32 = 1;

/// Environment variable that roots relative output paths.
pub const OUTPUT_ROOT_ENV: &str = "PROSPECT_OUTPUT_ROOT";

/// Learner presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Ocular CatBoost-style and cardiac XGBoost-style boosters.
    #[default]
    Full,
    /// Same shapes with 40 shallow trees; for smoke runs and tests.
    Fast,
}

impl Preset {
    pub fn loso(self) -> LosoConfig {
        match self {
            Preset::Full => LosoConfig::default(),
            Preset::Fast => {
                let light = |mut c: GbdtConfig| {
                    c.n_trees = 40;
                    c.max_depth = 3;
                    c.learning_rate = 0.1;
                    LearnerSpec::Gbdt(c)
                };
                LosoConfig {
                    ocular: light(GbdtConfig::catboost_like()),
                    cardiac: light(GbdtConfig::xgboost_like()),
                    ..LosoConfig::default()
                }
            }
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Preset::Full),
            "fast" => Ok(Preset::Fast),
            other => Err(Error::invalid(format!("unknown preset {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub manifests: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatsConfig {
    pub alpha: f64,
    /// Phase whose participant means feed the group comparison.
    pub phase: Phase,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig { alpha: 0.05, phase: Phase::Low }
    }
}

/// Features the classifiers see, after within-subject z-scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureSelection {
    pub ocular: Vec<String>,
    pub cardiac: Vec<String>,
}

impl Default for FeatureSelection {
    fn default() -> Self {
        FeatureSelection {
            ocular: FINAL_OCULAR_FEATURES.iter().map(|s| s.to_string()).collect(),
            cardiac: FINAL_CARDIAC_FEATURES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl FeatureSelection {
    pub fn get(&self, modality: Modality) -> &[String] {
        match modality {
            Modality::Ocular => &self.ocular,
            Modality::Cardiac => &self.cardiac,
        }
    }
}

/// Per-key overrides on top of the preset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateOverrides {
    pub inner_folds: Option<usize>,
    pub ocular: Option<LearnerSpec>,
    pub cardiac: Option<LearnerSpec>,
    pub meta: Option<LearnerSpec>,
    pub grid: Option<GridSpec>,
    pub consensus: Option<bool>,
    /// Debug only: trains each fold on its held-out participant too, which
    /// the leakage guard must refuse.
    pub inject_leak: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_target")]
    pub modality: Target,
    #[serde(default)]
    pub preset: Preset,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub extract: ExtractConfig,
    #[serde(default)]
    pub stats: StatsConfig,
    #[serde(default)]
    pub features: FeatureSelection,
    #[serde(default)]
    pub evaluate: EvaluateOverrides,
}

fn default_target() -> Target {
    Target::Fused
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            version: CONFIG_VERSION,
            seed: 0,
            modality: default_target(),
            preset: Preset::default(),
            paths: Paths::default(),
            extract: ExtractConfig::default(),
            stats: StatsConfig::default(),
            features: FeatureSelection::default(),
            evaluate: EvaluateOverrides::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::invalid(format!("configuration: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::invalid(format!(
                "configuration version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.extract.validate()?;
        if !(self.stats.alpha > 0.0 && self.stats.alpha < 1.0) {
            return Err(Error::invalid("stats.alpha must lie in (0, 1)"));
        }
        for m in self.modality.modalities() {
            if self.features.get(m).is_empty() {
                return Err(Error::invalid(format!("no {m} features selected")));
            }
        }
        self.loso().validate()
    }

    /// Preset learners with the configured overrides applied.
    pub fn loso(&self) -> LosoConfig {
        let mut cfg = self.preset.loso();
        let o = &self.evaluate;
        if let Some(v) = o.inner_folds {
            cfg.inner_folds = v;
        }
        if let Some(v) = &o.ocular {
            cfg.ocular = v.clone();
        }
        if let Some(v) = &o.cardiac {
            cfg.cardiac = v.clone();
        }
        if let Some(v) = &o.meta {
            cfg.meta = v.clone();
        }
        if o.grid.is_some() {
            cfg.grid = o.grid.clone();
        }
        if let Some(v) = o.consensus {
            cfg.consensus = v;
        }
        if let Some(v) = o.inject_leak {
            cfg.inject_leak = v;
        }
        cfg
    }
}

/// Relative paths are placed under `$PROSPECT_OUTPUT_ROOT` when it is set.
pub fn output_path(path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if path.is_relative() && !root.is_empty() => PathBuf::from(root).join(path),
        _ => path.to_path_buf(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = PipelineConfig::from_toml("version = 1\n").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!(cfg.loso(), LosoConfig::default());
    }

    #[test]
    fn unknown_keys_and_versions_rejected() {
        let err = PipelineConfig::from_toml("version = 1\nbogus = 3\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(PipelineConfig::from_toml("version = 2\n").is_err());
        assert!(PipelineConfig::from_toml("seed = 1\n").is_err());
        assert!(PipelineConfig::from_toml("version = 1\n[extract.ocular]\nvel_threshold = 3\n").is_err());
    }

    #[test]
    fn invalid_values_fail_validation() {
        assert!(PipelineConfig::from_toml("version = 1\n[stats]\nalpha = 1.5\n").is_err());
        assert!(PipelineConfig::from_toml("version = 1\n[evaluate]\ninner_folds = 1\n").is_err());
        assert!(PipelineConfig::from_toml("version = 1\n[extract.sg]\nwindow = 12\n").is_err());
    }

    #[test]
    fn overrides_apply_on_top_of_preset() {
        let text = "version = 1\npreset = \"fast\"\nmodality = \"ocular\"\n[evaluate]\nconsensus = false\n\
                    [evaluate.meta]\nkind = \"linear_margin\"\n";
        let cfg = PipelineConfig::from_toml(text).unwrap();
        let loso = cfg.loso();
        assert!(!loso.consensus);
        assert!(matches!(loso.meta, LearnerSpec::LinearMargin(_)));
        match loso.ocular {
            LearnerSpec::Gbdt(c) => assert_eq!(c.n_trees, 40),
            _ => panic!("preset learner replaced"),
        }
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = PipelineConfig { seed: 9, preset: Preset::Fast, ..PipelineConfig::default() };
        assert_eq!(PipelineConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
