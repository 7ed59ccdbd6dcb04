use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::consensus::{fuse_available, MetaLearner, MetaSample, ScoreModality, ScoreModel, SubjectScore};
use super::{calibrate_threshold, compute_metrics, logit_mean_pool, ConfusionMatrix, Metrics};
use crate::error::{Error, Result};
use crate::learners::{
    grid_search, group_labels, lattice, oof_scores, GbdtConfig, LearnerSpec, Matrix, OofScore, TrainedModel,
    TrainingSet,
};
use crate::model::{Dataset, Modality, ParticipantRecord, Phase};

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Which predictions an evaluation produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Ocular,
    Cardiac,
    Fused,
}

impl Target {
    pub fn modalities(self) -> Vec<Modality> {
        match self {
            Target::Ocular => vec![Modality::Ocular],
            Target::Cardiac => vec![Modality::Cardiac],
            Target::Fused => vec![Modality::Ocular, Modality::Cardiac],
        }
    }
}

impl std::str::FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ocular" => Ok(Target::Ocular),
            "cardiac" => Ok(Target::Cardiac),
            "fused" => Ok(Target::Fused),
            other => Err(Error::invalid(format!("unknown modality selection {other:?}"))),
        }
    }
}

/// Hyperparameter lattice searched per fold for boosted learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_trees: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub learning_rate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LosoConfig {
    pub inner_folds: usize,
    pub ocular: LearnerSpec,
    pub cardiac: LearnerSpec,
    pub meta: LearnerSpec,
    pub grid: Option<GridSpec>,
    pub consensus: bool,
    /// Debug only: adds the held-out participant to its own training fold.
    pub inject_leak: bool,
}

impl Default for LosoConfig {
    fn default() -> Self {
        LosoConfig {
            inner_folds: 4,
            ocular: LearnerSpec::Gbdt(GbdtConfig::catboost_like()),
            cardiac: LearnerSpec::Gbdt(GbdtConfig::xgboost_like()),
            meta: LearnerSpec::Gbdt(GbdtConfig::fusion_meta()),
            grid: None,
            consensus: true,
            inject_leak: false,
        }
    }
}

impl LosoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.inner_folds < 2 {
            return Err(Error::invalid("inner_folds must be at least 2"));
        }
        for spec in [&self.ocular, &self.cardiac, &self.meta] {
            if let LearnerSpec::Gbdt(c) = spec {
                c.validate()?;
            }
        }
        if let Some(g) = &self.grid {
            if g.n_trees.is_empty() || g.max_depth.is_empty() || g.learning_rate.is_empty() {
                return Err(Error::invalid("grid search lists must be non-empty"));
            }
        }
        Ok(())
    }

    pub fn learner(&self, modality: Modality) -> &LearnerSpec {
        match modality {
            Modality::Ocular => &self.ocular,
            Modality::Cardiac => &self.cardiac,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub held_out: String,
    /// Every participant whose data was read while training or tuning.
    pub training_participants: Vec<String>,
    /// Keyed by `ocular`, `cardiac` and `fusion`.
    pub thresholds: BTreeMap<String, f64>,
    pub configs: BTreeMap<String, LearnerSpec>,
    pub meta_training_pairs: usize,
    /// True when the meta-learner was fitted on all training pairs because
    /// the disagreement pairs lacked a class.
    pub meta_fallback: bool,
    /// Modalities whose threshold came from in-sample training scores
    /// because a class had fewer than two training participants.
    pub in_sample_thresholds: Vec<String>,
    pub scores: Vec<SubjectScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityResult {
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub seed: u64,
    pub target: Target,
    pub consensus: bool,
    pub folds: Vec<FoldReport>,
    pub results: BTreeMap<ScoreModality, ModalityResult>,
}

impl EvalReport {
    pub fn scores(&self, modality: ScoreModality) -> Vec<&SubjectScore> {
        self.folds
            .iter()
            .flat_map(|f| f.scores.iter())
            .filter(|s| s.modality == modality)
            .collect()
    }

    pub fn result(&self, modality: ScoreModality) -> Result<&ModalityResult> {
        self.results
            .get(&modality)
            .ok_or_else(|| Error::invalid(format!("report has no {modality} results")))
    }

    pub fn bacc(&self, modality: ScoreModality) -> Result<f64> {
        Ok(self.result(modality)?.metrics.bacc)
    }

    /// The modality the target's headline metrics refer to.
    pub fn primary(&self) -> ScoreModality {
        match self.target {
            Target::Ocular => ScoreModality::Ocular,
            Target::Cardiac => ScoreModality::Cardiac,
            Target::Fused => ScoreModality::Fused,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::invalid(format!("serialising report: {e}")))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        crate::stats::write_file(path, &(self.to_json()? + "\n"))
    }

    /// One row per scored modality.
    pub fn write_confusion_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("modality,tn,fp,fn,tp,bacc,macro_pr,macro_re,macro_f1,mcc\n");
        for (m, r) in &self.results {
            let c = &r.confusion;
            let x = &r.metrics;
            out.push_str(&format!(
                "{m},{},{},{},{},{},{},{},{},{}\n",
                c.tn, c.fp, c.fn_, c.tp, x.bacc, x.macro_pr, x.macro_re, x.macro_f1, x.mcc
            ));
        }
        crate::stats::write_file(path, &out)
    }
}

/// Records which participants a fold touches and refuses the held-out one.
#[derive(Debug)]
pub struct LeakageGuard {
    held_out: String,
    reads: BTreeSet<String>,
}

impl LeakageGuard {
    pub fn new(held_out: &str) -> Self {
        LeakageGuard { held_out: held_out.to_string(), reads: BTreeSet::new() }
    }

    pub fn read(&mut self, participant: &str, stage: &str) -> Result<()> {
        if participant == self.held_out {
            return Err(Error::Leakage { participant: participant.to_string(), stage: stage.to_string() });
        }
        self.reads.insert(participant.to_string());
        Ok(())
    }

    pub fn reads(&self) -> Vec<String> {
        self.reads.iter().cloned().collect()
    }
}

fn low_windows(p: &ParticipantRecord, modality: Modality) -> Matrix {
    Matrix::from_table(&p.table(modality).filter_phase(Phase::Low))
}

/// LowComplexity window rows of `members`, grouped by position in `members`.
fn training_set(
    members: &[&ParticipantRecord],
    modality: Modality,
    guard: &mut LeakageGuard,
) -> Result<(TrainingSet, Vec<usize>)> {
    let registry = members
        .first()
        .map(|p| p.table(modality).registry().to_vec())
        .unwrap_or_default();
    let mut data = Vec::new();
    let (mut y, mut groups, mut present) = (Vec::new(), Vec::new(), Vec::new());
    for (g, p) in members.iter().enumerate() {
        guard.read(&p.id, &format!("{modality} training"))?;
        let x = low_windows(p, modality);
        if x.rows() == 0 {
            continue;
        }
        present.push(g);
        for r in 0..x.rows() {
            data.extend_from_slice(x.row(r));
            y.push(p.label.as_class());
            groups.push(g);
        }
    }
    let x = Matrix::new(y.len(), registry.len(), data)?;
    Ok((TrainingSet::new(x, y, groups, registry)?, present))
}

fn fold_seed(seed: u64, fold: usize, salt: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((fold as u64) << 8)
        .wrapping_add(salt)
}

struct UnimodalFold {
    inner_cv: bool,
    tau: f64,
    spec: LearnerSpec,
    /// Out-of-fold pooled score per training participant index.
    oof: BTreeMap<usize, f64>,
    held_out: Option<SubjectScore>,
}

fn in_sample_scores(model: &TrainedModel, data: &TrainingSet, labels: &BTreeMap<usize, u8>) -> Result<Vec<OofScore>> {
    let p = model.predict_proba(&data.x, &data.registry)?;
    labels
        .iter()
        .map(|(&g, &y)| {
            let probs: Vec<f64> = data.groups.iter().zip(&p).filter(|(&dg, _)| dg == g).map(|(_, &v)| v).collect();
            Ok(OofScore { group: g, p: logit_mean_pool(&probs)?, y })
        })
        .collect()
}

fn run_unimodal(
    members: &[&ParticipantRecord],
    held: &ParticipantRecord,
    modality: Modality,
    cfg: &LosoConfig,
    seed: u64,
    guard: &mut LeakageGuard,
) -> Result<UnimodalFold> {
    let (data, _) = training_set(members, modality, guard)?;
    if data.is_empty() {
        return Err(Error::data(format!("no {modality} LowComplexity windows in the training fold")));
    }
    let labels = group_labels(&data);
    let smallest = [0u8, 1]
        .iter()
        .map(|&c| labels.values().filter(|&&y| y == c).count())
        .min()
        .unwrap_or(0);
    let inner_cv = smallest >= 2;
    let spec = match (&cfg.grid, cfg.learner(modality)) {
        (Some(g), LearnerSpec::Gbdt(base)) if inner_cv => {
            let grid = lattice(base, &g.n_trees, &g.max_depth, &g.learning_rate);
            LearnerSpec::Gbdt(grid_search(&grid, &data, cfg.inner_folds, seed)?.0)
        }
        (_, spec) => spec.clone(),
    };
    let model = spec.train(&data, seed)?;
    let oof = if inner_cv {
        oof_scores(&spec, &data, cfg.inner_folds, seed)?
    } else {
        log::warn!(
            "{modality}: too few participants per class for inner cross-validation when holding out {}; \
             threshold uses in-sample scores",
            held.id
        );
        in_sample_scores(&model, &data, &labels)?
    };
    let pairs: Vec<(f64, u8)> = oof.iter().map(|o| (o.p, o.y)).collect();
    let threshold = calibrate_threshold(&pairs);
    if !threshold.calibrated {
        log::warn!("{modality} threshold for fold holding out {} defaulted to 0.5", held.id);
    }
    let x = low_windows(held, modality);
    let held_out = if x.rows() == 0 {
        None
    } else {
        let p = logit_mean_pool(&model.predict_proba(&x, &data.registry)?)?;
        let m = match modality {
            Modality::Ocular => ScoreModality::Ocular,
            Modality::Cardiac => ScoreModality::Cardiac,
        };
        Some(SubjectScore::new(held.id.clone(), m, p, threshold.tau, held.label.as_class()))
    };
    Ok(UnimodalFold {
        inner_cv,
        tau: threshold.tau,
        spec,
        oof: oof.iter().map(|o| (o.group, o.p)).collect(),
        held_out,
    })
}

fn run_fold(
    ds: &Dataset,
    fold: usize,
    cfg: &LosoConfig,
    target: Target,
    seed: u64,
    meta_learner: &dyn MetaLearner,
) -> Result<FoldReport> {
    let held = &ds.participants[fold];
    let members: Vec<&ParticipantRecord> = ds
        .participants
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != fold || cfg.inject_leak)
        .map(|(_, p)| p)
        .collect();
    let mut guard = LeakageGuard::new(&held.id);
    let mut report = FoldReport {
        fold,
        held_out: held.id.clone(),
        training_participants: Vec::new(),
        thresholds: BTreeMap::new(),
        configs: BTreeMap::new(),
        meta_training_pairs: 0,
        meta_fallback: false,
        in_sample_thresholds: Vec::new(),
        scores: Vec::new(),
    };
    let mut uni = BTreeMap::new();
    for (salt, m) in target.modalities().into_iter().enumerate() {
        if target != Target::Fused && low_windows(held, m).rows() == 0 {
            return Err(Error::data(format!("participant {} has no {m} LowComplexity windows", held.id)));
        }
        let r = run_unimodal(&members, held, m, cfg, fold_seed(seed, fold, salt as u64), &mut guard)?;
        report.thresholds.insert(m.to_string(), r.tau);
        if !r.inner_cv {
            report.in_sample_thresholds.push(m.to_string());
        }
        report.configs.insert(m.to_string(), r.spec.clone());
        report.scores.extend(r.held_out.clone());
        uni.insert(m, r);
    }
    if target == Target::Fused {
        let (o, c) = (&uni[&Modality::Ocular], &uni[&Modality::Cardiac]);
        let mut all = Vec::new();
        let mut disagree = Vec::new();
        for (g, &po) in &o.oof {
            let Some(&pc) = c.oof.get(g) else { continue };
            let s = MetaSample { p_ocular: po, p_cardiac: pc, y: members[*g].label.as_class() };
            if (po >= o.tau) != (pc >= c.tau) {
                disagree.push(s);
            }
            all.push(s);
        }
        let both = |v: &[MetaSample]| v.iter().any(|s| s.y == 0) && v.iter().any(|s| s.y == 1);
        let train = if both(&disagree) {
            disagree
        } else {
            report.meta_fallback = true;
            all
        };
        report.meta_training_pairs = train.len();
        let meta: Box<dyn ScoreModel> = meta_learner.fit(&train, fold_seed(seed, fold, 7))?;
        let scored = train
            .iter()
            .map(|s| Ok((meta.predict(s.p_ocular, s.p_cardiac)?, s.y)))
            .collect::<Result<Vec<_>>>()?;
        let tau_fusion = calibrate_threshold(&scored).tau;
        report.thresholds.insert("fusion".into(), tau_fusion);
        report.configs.insert("fusion".into(), cfg.meta.clone());
        let fused = fuse_available(
            o.held_out.as_ref(),
            c.held_out.as_ref(),
            meta.as_ref(),
            tau_fusion,
            cfg.consensus,
        )
        .map_err(|e| e.context(format!("participant {}", held.id)))?;
        report.scores.push(fused);
    }
    report.training_participants = guard.reads();
    Ok(report)
}

/// Leave-one-subject-out evaluation with the configured learners.
pub fn loso_run(ds: &Dataset, cfg: &LosoConfig, target: Target, seed: u64) -> Result<EvalReport> {
    loso_run_with(ds, cfg, target, seed, &cfg.meta)
}

/// As [`loso_run`], with a caller-supplied fusion meta-learner.
pub fn loso_run_with(
    ds: &Dataset,
    cfg: &LosoConfig,
    target: Target,
    seed: u64,
    meta: &dyn MetaLearner,
) -> Result<EvalReport> {
    cfg.validate()?;
    if ds.len() < 4 {
        return Err(Error::data(format!("LOSO needs at least 4 participants, got {}", ds.len())));
    }
    if ds.participants.iter().all(|p| p.label == ds.participants[0].label) {
        return Err(Error::data("LOSO needs participants of both classes"));
    }
    let mut sorted = ds.clone();
    sorted.participants.sort_by(|a, b| a.id.cmp(&b.id));
    let folds = (0..sorted.len())
        .into_par_iter()
        .map(|f| run_fold(&sorted, f, cfg, target, seed, meta))
        .collect::<Result<Vec<_>>>()?;
    let mut results = BTreeMap::new();
    let kinds: BTreeSet<ScoreModality> = folds.iter().flat_map(|f| f.scores.iter().map(|s| s.modality)).collect();
    for m in kinds {
        let confusion = ConfusionMatrix::from_pairs(
            folds.iter().flat_map(|f| f.scores.iter()).filter(|s| s.modality == m).map(|s| (s.y_true, s.y_hat)),
        );
        results.insert(m, ModalityResult { confusion, metrics: compute_metrics(&confusion) });
    }
    Ok(EvalReport { format_version: REPORT_FORMAT_VERSION, seed, target, consensus: cfg.consensus, folds, results })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FeatureTable, FeatureWindow, Label};

    fn record(id: &str, label: Label, shift: f64, n: usize) -> ParticipantRecord {
        let mut t = FeatureTable::new(vec!["f".into(), "g".into()]);
        for i in 0..n {
            let jitter = ((i * 7 + id.len()) % 5) as f64 * 0.1;
            t.push(FeatureWindow {
                participant_id: id.into(),
                phase: Phase::Low,
                window_index: i,
                t_start: i as f64,
                t_end: i as f64 + 1.0,
                values: vec![Some(shift + jitter), Some(jitter)],
            })
            .unwrap();
        }
        let mut c = FeatureTable::new(vec!["h".into()]);
        for i in 0..n {
            c.push(FeatureWindow {
                participant_id: id.into(),
                phase: Phase::Low,
                window_index: i,
                t_start: i as f64,
                t_end: i as f64 + 1.0,
                values: vec![Some(-shift + (i % 3) as f64 * 0.1)],
            })
            .unwrap();
        }
        ParticipantRecord { id: id.into(), label, ocular: t, cardiac: c }
    }

    fn cohort(n: usize) -> Dataset {
        let ps = (0..n)
            .map(|i| {
                let label = if i % 2 == 0 { Label::Win } else { Label::Loss };
                record(&format!("p{i:02}"), label, if label == Label::Win { 2.0 } else { -2.0 }, 6)
            })
            .collect();
        Dataset::new(ps).unwrap()
    }

    fn quick() -> LosoConfig {
        let g = GbdtConfig { n_trees: 10, max_depth: 2, learning_rate: 0.3, ..GbdtConfig::catboost_like() };
        LosoConfig {
            inner_folds: 2,
            ocular: LearnerSpec::Gbdt(g.clone()),
            cardiac: LearnerSpec::Gbdt(g),
            ..LosoConfig::default()
        }
    }

    #[test]
    fn separable_four_participants() {
        let r = loso_run(&cohort(4), &quick(), Target::Ocular, 1).unwrap();
        assert_eq!(r.folds.len(), 4);
        assert_eq!(r.bacc(ScoreModality::Ocular).unwrap(), 1.0);
        for f in &r.folds {
            assert!(!f.training_participants.contains(&f.held_out));
            assert_eq!(f.training_participants.len(), 3);
        }
    }

    #[test]
    fn fused_run_scores_every_modality() {
        let r = loso_run(&cohort(8), &quick(), Target::Fused, 2).unwrap();
        for m in [ScoreModality::Ocular, ScoreModality::Cardiac, ScoreModality::Fused] {
            assert_eq!(r.scores(m).len(), 8);
            assert_eq!(r.result(m).unwrap().metrics, compute_metrics(&r.result(m).unwrap().confusion));
        }
        assert!(r.folds.iter().all(|f| f.thresholds.contains_key("fusion")));
    }

    #[test]
    fn injected_leak_is_caught() {
        let cfg = LosoConfig { inject_leak: true, ..quick() };
        let err = loso_run(&cohort(4), &cfg, Target::Ocular, 0).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn participant_order_does_not_matter() {
        let ds = cohort(6);
        let mut rev = ds.clone();
        rev.participants.reverse();
        let a = loso_run(&ds, &quick(), Target::Cardiac, 3).unwrap();
        let b = loso_run(&rev, &quick(), Target::Cardiac, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_tiny_or_single_class_cohorts() {
        assert!(loso_run(&cohort(3), &quick(), Target::Ocular, 0).is_err());
        let mut ds = cohort(4);
        for p in &mut ds.participants {
            p.label = Label::Win;
        }
        assert!(loso_run(&ds, &quick(), Target::Ocular, 0).is_err());
    }

    #[test]
    fn missing_windows_error_for_unimodal_runs() {
        let mut ds = cohort(4);
        ds.participants[0].ocular = FeatureTable::new(vec!["f".into(), "g".into()]);
        let err = loso_run(&ds, &quick(), Target::Ocular, 0).unwrap_err();
        assert!(err.to_string().contains("p00"), "{err}");
    }
}
