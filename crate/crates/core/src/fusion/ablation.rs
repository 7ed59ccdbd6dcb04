use std::path::Path;

use serde::{Deserialize, Serialize};

use super::consensus::{MetaLearner, ScoreModality};
use super::loso::{loso_run_with, EvalReport, LosoConfig, Target};
use super::Metrics;
use crate::error::{Error, Result};
use crate::model::{Dataset, Modality};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OcularComponent {
    Pupil,
    Fixation,
    Saccade,
    AoiGaze,
}

impl OcularComponent {
    pub const ALL: [OcularComponent; 4] = [
        OcularComponent::Pupil,
        OcularComponent::Fixation,
        OcularComponent::Saccade,
        OcularComponent::AoiGaze,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OcularComponent::Pupil => "pupil",
            OcularComponent::Fixation => "fixation",
            OcularComponent::Saccade => "saccade",
            OcularComponent::AoiGaze => "aoi_gaze",
        }
    }

    fn prefix(self) -> &'static str {
        match self {
            OcularComponent::Pupil => "pupil_",
            OcularComponent::Fixation => "fixation_",
            OcularComponent::Saccade => "saccade_",
            OcularComponent::AoiGaze => "aoi_",
        }
    }

    pub fn owns(self, feature: &str) -> bool {
        feature.starts_with(self.prefix())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// `full` for the baseline, otherwise the removed component.
    pub variant: String,
    pub removed: Vec<String>,
    pub metrics: Metrics,
    /// Baseline BAcc minus this row's BAcc.
    pub delta_bacc: f64,
}

fn write_rows(path: &Path, header: &str, rows: &[(String, Metrics, f64)]) -> Result<()> {
    let mut out = format!("{header},bacc,macro_f1,macro_pr,macro_re,mcc,delta_bacc\n");
    for (name, m, d) in rows {
        out.push_str(&format!(
            "{name},{},{},{},{},{},{d}\n",
            m.bacc, m.macro_f1, m.macro_pr, m.macro_re, m.mcc
        ));
    }
    crate::stats::write_file(path, &out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcularAblation {
    pub rows: Vec<AblationRow>,
}

impl OcularAblation {
    pub fn row(&self, variant: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<_> = self.rows.iter().map(|r| (r.variant.clone(), r.metrics, r.delta_bacc)).collect();
        write_rows(path, "variant", &rows)
    }
}

/// Reruns the ocular LOSO evaluation with each component's features removed
/// in turn. A component with no features in the set reuses the baseline.
pub fn ablate_ocular(
    ds: &Dataset,
    cfg: &LosoConfig,
    seed: u64,
    components: &[OcularComponent],
) -> Result<OcularAblation> {
    ablate_ocular_with(ds, cfg, seed, components, &cfg.meta)
}

pub fn ablate_ocular_with(
    ds: &Dataset,
    cfg: &LosoConfig,
    seed: u64,
    components: &[OcularComponent],
    meta: &dyn MetaLearner,
) -> Result<OcularAblation> {
    let base = loso_run_with(ds, cfg, Target::Ocular, seed, meta)?;
    let base_metrics = base.result(ScoreModality::Ocular)?.metrics;
    let mut rows = vec![AblationRow {
        variant: "full".into(),
        removed: Vec::new(),
        metrics: base_metrics,
        delta_bacc: 0.0,
    }];
    let registry = ds.registry(Modality::Ocular).to_vec();
    for &c in components {
        let (removed, kept): (Vec<String>, Vec<String>) = registry.iter().cloned().partition(|f| c.owns(f));
        if kept.is_empty() {
            return Err(Error::invalid(format!(
                "removing the {} component leaves no ocular features",
                c.as_str()
            )));
        }
        let metrics = if removed.is_empty() {
            base_metrics
        } else {
            let reduced = ds.select_features(Modality::Ocular, &kept)?;
            loso_run_with(&reduced, cfg, Target::Ocular, seed, meta)?
                .result(ScoreModality::Ocular)?
                .metrics
        };
        rows.push(AblationRow {
            variant: c.as_str().into(),
            removed,
            delta_bacc: base_metrics.bacc - metrics.bacc,
            metrics,
        });
    }
    Ok(OcularAblation { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsDelta {
    pub bacc: f64,
    pub macro_f1: f64,
    pub macro_pr: f64,
    pub macro_re: f64,
    pub mcc: f64,
}

impl MetricsDelta {
    pub fn between(with: &Metrics, without: &Metrics) -> Self {
        MetricsDelta {
            bacc: with.bacc - without.bacc,
            macro_f1: with.macro_f1 - without.macro_f1,
            macro_pr: with.macro_pr - without.macro_pr,
            macro_re: with.macro_re - without.macro_re,
            mcc: with.mcc - without.mcc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusAblation {
    pub with_consensus: EvalReport,
    pub without_consensus: EvalReport,
    /// With minus without, on the fused predictions.
    pub delta: MetricsDelta,
}

impl ConsensusAblation {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let w = self.with_consensus.result(ScoreModality::Fused)?.metrics;
        let wo = self.without_consensus.result(ScoreModality::Fused)?.metrics;
        let rows = vec![
            ("with_consensus".to_string(), w, 0.0),
            ("without_consensus".to_string(), wo, self.delta.bacc),
        ];
        write_rows(path, "variant", &rows)
    }
}

/// Fused evaluation with and without the consensus gate; everything else
/// is held fixed.
pub fn ablate_consensus(ds: &Dataset, cfg: &LosoConfig, seed: u64) -> Result<ConsensusAblation> {
    ablate_consensus_with(ds, cfg, seed, &cfg.meta)
}

pub fn ablate_consensus_with(
    ds: &Dataset,
    cfg: &LosoConfig,
    seed: u64,
    meta: &dyn MetaLearner,
) -> Result<ConsensusAblation> {
    let with_cfg = LosoConfig { consensus: true, ..cfg.clone() };
    let without_cfg = LosoConfig { consensus: false, ..cfg.clone() };
    let with_consensus = loso_run_with(ds, &with_cfg, Target::Fused, seed, meta)?;
    let without_consensus = loso_run_with(ds, &without_cfg, Target::Fused, seed, meta)?;
    let delta = MetricsDelta::between(
        &with_consensus.result(ScoreModality::Fused)?.metrics,
        &without_consensus.result(ScoreModality::Fused)?.metrics,
    );
    Ok(ConsensusAblation { with_consensus, without_consensus, delta })
}
