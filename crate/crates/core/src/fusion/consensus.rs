use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{LearnerSpec, Matrix, TrainedModel, TrainingSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreModality {
    Ocular,
    Cardiac,
    Fused,
}

impl ScoreModality {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreModality::Ocular => "ocular",
            ScoreModality::Cardiac => "cardiac",
            ScoreModality::Fused => "fused",
        }
    }
}

impl fmt::Display for ScoreModality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Pooled prediction for one participant. `y_hat` is always `p >= tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectScore {
    pub participant_id: String,
    pub modality: ScoreModality,
    pub p: f64,
    pub tau: f64,
    pub y_hat: u8,
    pub y_true: u8,
}

impl SubjectScore {
    pub fn new(participant_id: impl Into<String>, modality: ScoreModality, p: f64, tau: f64, y_true: u8) -> Self {
        SubjectScore {
            participant_id: participant_id.into(),
            modality,
            p,
            tau,
            y_hat: u8::from(p >= tau),
            y_true,
        }
    }

    fn relabel(&self, modality: ScoreModality) -> Self {
        SubjectScore { modality, ..self.clone() }
    }
}

/// Second-level model over the two unimodal probabilities.
pub trait ScoreModel: Send + Sync {
    fn predict(&self, p_ocular: f64, p_cardiac: f64) -> Result<f64>;
}

/// Fits a [`ScoreModel`] on training-fold probability pairs.
pub trait MetaLearner: Send + Sync {
    fn fit(&self, samples: &[MetaSample], seed: u64) -> Result<Box<dyn ScoreModel>>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaSample {
    pub p_ocular: f64,
    pub p_cardiac: f64,
    pub y: u8,
}

fn meta_registry() -> Vec<String> {
    vec!["p_ocular".into(), "p_cardiac".into()]
}

impl ScoreModel for TrainedModel {
    fn predict(&self, p_ocular: f64, p_cardiac: f64) -> Result<f64> {
        let x = Matrix::new(1, 2, vec![p_ocular, p_cardiac])?;
        Ok(self.predict_proba(&x, &meta_registry())?[0])
    }
}

impl MetaLearner for LearnerSpec {
    fn fit(&self, samples: &[MetaSample], seed: u64) -> Result<Box<dyn ScoreModel>> {
        if samples.is_empty() {
            return Err(Error::data("no training pairs for the fusion meta-learner"));
        }
        let data: Vec<f64> = samples.iter().flat_map(|s| [s.p_ocular, s.p_cardiac]).collect();
        let set = TrainingSet::new(
            Matrix::new(samples.len(), 2, data)?,
            samples.iter().map(|s| s.y).collect(),
            (0..samples.len()).collect(),
            meta_registry(),
        )?;
        Ok(Box::new(self.train(&set, seed)?))
    }
}

/// Agreement score: mean probability against the mean threshold, which
/// reproduces the shared label.
fn agreed(ocular: &SubjectScore, cardiac: &SubjectScore) -> SubjectScore {
    let p = 0.5 * (ocular.p + cardiac.p);
    let mut tau = 0.5 * (ocular.tau + cardiac.tau);
    let label = ocular.y_hat;
    if label == 1 && p < tau {
        tau = p;
    } else if label == 0 && p >= tau {
        tau = p.next_up();
    }
    let s = SubjectScore::new(ocular.participant_id.clone(), ScoreModality::Fused, p, tau, ocular.y_true);
    debug_assert_eq!(s.y_hat, label);
    s
}

fn check_pair(ocular: &SubjectScore, cardiac: &SubjectScore) -> Result<()> {
    if ocular.participant_id != cardiac.participant_id || ocular.y_true != cardiac.y_true {
        return Err(Error::invalid(format!(
            "fusing scores of different participants {:?} and {:?}",
            ocular.participant_id, cardiac.participant_id
        )));
    }
    Ok(())
}

/// Consensus-first fusion: agreeing modalities decide, the meta-model
/// resolves disagreements against `tau_fusion`.
pub fn consensus_fuse(
    ocular: &SubjectScore,
    cardiac: &SubjectScore,
    meta: &dyn ScoreModel,
    tau_fusion: f64,
) -> Result<SubjectScore> {
    check_pair(ocular, cardiac)?;
    if ocular.y_hat == cardiac.y_hat {
        return Ok(agreed(ocular, cardiac));
    }
    stacked_fuse(ocular, cardiac, meta, tau_fusion)
}

/// Meta-model decision for every participant, without the consensus gate.
pub fn stacked_fuse(
    ocular: &SubjectScore,
    cardiac: &SubjectScore,
    meta: &dyn ScoreModel,
    tau_fusion: f64,
) -> Result<SubjectScore> {
    check_pair(ocular, cardiac)?;
    let p = meta.predict(ocular.p, cardiac.p)?;
    Ok(SubjectScore::new(ocular.participant_id.clone(), ScoreModality::Fused, p, tau_fusion, ocular.y_true))
}

/// Fuses whatever is available; a single modality passes through.
pub fn fuse_available(
    ocular: Option<&SubjectScore>,
    cardiac: Option<&SubjectScore>,
    meta: &dyn ScoreModel,
    tau_fusion: f64,
    consensus: bool,
) -> Result<SubjectScore> {
    match (ocular, cardiac) {
        (Some(o), Some(c)) if consensus => consensus_fuse(o, c, meta, tau_fusion),
        (Some(o), Some(c)) => stacked_fuse(o, c, meta, tau_fusion),
        (Some(only), None) | (None, Some(only)) => {
            log::warn!(
                "participant {}: only {} scores available, fused prediction falls back to it",
                only.participant_id,
                only.modality
            );
            Ok(only.relabel(ScoreModality::Fused))
        }
        (None, None) => Err(Error::data("no modality available to fuse")),
    }
}
