//! Stage orchestration: raw sessions to window tables, statistics, models,
//! evaluation reports and trend plots. Every command is a pure function of
//! its inputs, configuration and seed.

mod config;
mod extract;
mod trends;

pub use config::{
    output_path, EvaluateOverrides, FeatureSelection, Paths, PipelineConfig, Preset, StatsConfig, CONFIG_VERSION,
    OUTPUT_ROOT_ENV,
};
pub use extract::{extract_dir, extract_participant, manifest_paths, ExtractConfig};
pub use trends::{phase_trends, trend_svg, write_trends_csv, TrendRow};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fusion::{ablate_consensus, ablate_ocular, loso_run, EvalReport, OcularComponent};
use crate::learners::{feature_importance, Matrix, TrainedModel, TrainingSet};
use crate::model::{Dataset, Modality, Phase};
use crate::stats::{statistical_filter, write_qq_csv, write_stats_csv, zscore_dataset, FeatureReport};
use crate::synthgen::{generate_cohort, CohortSummary, SynthSpec};

/// Reads a generator spec (JSON) and writes the cohort under `out`.
pub fn cmd_synthgen(spec_path: &Path, out: &Path, seed: Option<u64>) -> Result<CohortSummary> {
    let text = std::fs::read_to_string(spec_path).map_err(|e| Error::io(spec_path, e))?;
    let mut spec: SynthSpec = serde_json::from_str(&text)
        .map_err(|e| Error::invalid(format!("{}: {e}", spec_path.display())))?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    generate_cohort(&spec, out)
}

/// Extracts every manifest under `manifests` and writes the window tables.
pub fn cmd_extract(manifests: &Path, out: &Path, cfg: &PipelineConfig) -> Result<Dataset> {
    let ds = extract_dir(manifests, &cfg.extract)?;
    ds.save_dir(out)?;
    Ok(ds)
}

pub fn load_features(dir: &Path) -> Result<Dataset> {
    let ds = Dataset::load_dir(dir)?;
    if ds.is_empty() {
        return Err(Error::data(format!("no participants in {}", dir.display())));
    }
    Ok(ds)
}

fn zscored(ds: &Dataset) -> Dataset {
    let mut out = ds.clone();
    for m in Modality::ALL {
        let (z, warnings) = zscore_dataset(&out, m);
        for (participant, feature) in warnings {
            log::warn!("{participant}: {m} feature {feature} is constant and was left at zero");
        }
        out = z;
    }
    out
}

/// Within-subject z-scoring followed by the configured feature selection.
pub fn prepare(ds: &Dataset, cfg: &PipelineConfig) -> Result<Dataset> {
    let mut out = zscored(ds);
    for m in Modality::ALL {
        out = out.select_features(m, cfg.features.get(m))?;
    }
    Ok(out)
}

/// Group comparisons per modality on z-scored features: `stats_<m>.csv`
/// plus Q-Q data for the top-ranked feature.
pub fn cmd_stats(features: &Path, out: &Path, cfg: &PipelineConfig) -> Result<Vec<(Modality, Vec<FeatureReport>)>> {
    let ds = zscored(&load_features(features)?);
    let mut all = Vec::new();
    for m in Modality::ALL {
        let rows = statistical_filter(&ds, m, Some(cfg.stats.phase), cfg.stats.alpha)?;
        write_stats_csv(&out.join(format!("stats_{m}.csv")), &rows)?;
        if let Some(top) = rows.first() {
            write_qq_csv(&out.join(format!("qq_{m}.csv")), &ds, m, &top.feature, Some(cfg.stats.phase))?;
        }
        all.push((m, rows));
    }
    Ok(all)
}

/// LowComplexity windows of every participant as one training set.
pub fn low_phase_set(ds: &Dataset, modality: Modality) -> Result<TrainingSet> {
    let registry = ds.registry(modality).to_vec();
    let (mut data, mut y, mut groups) = (Vec::new(), Vec::new(), Vec::new());
    for (g, p) in ds.participants.iter().enumerate() {
        let x = Matrix::from_table(&p.table(modality).filter_phase(Phase::Low));
        for r in 0..x.rows() {
            data.extend_from_slice(x.row(r));
            y.push(p.label.as_class());
            groups.push(g);
        }
    }
    if y.is_empty() {
        return Err(Error::data(format!("no {modality} LowComplexity windows to train on")));
    }
    TrainingSet::new(Matrix::new(y.len(), registry.len(), data)?, y, groups, registry)
}

/// Fits one model per selected modality on all participants and writes
/// `model_<m>.json` and `importance_<m>.csv`.
pub fn cmd_train(features: &Path, out: &Path, cfg: &PipelineConfig) -> Result<Vec<(Modality, TrainedModel)>> {
    let ds = prepare(&load_features(features)?, cfg)?;
    let loso = cfg.loso();
    let mut models = Vec::new();
    for m in cfg.modality.modalities() {
        let model = loso.learner(m).train(&low_phase_set(&ds, m)?, cfg.seed)?;
        model.save(&out.join(format!("model_{m}.json")))?;
        let mut csv = String::from("feature,importance\n");
        for (f, v) in feature_importance(&model) {
            let _ = writeln!(csv, "{f},{v}");
        }
        crate::stats::write_file(&out.join(format!("importance_{m}.csv")), &csv)?;
        models.push((m, model));
    }
    Ok(models)
}

/// Full LOSO evaluation; writes `report.json` and `confusion.csv`.
pub fn cmd_evaluate(features: &Path, out: &Path, cfg: &PipelineConfig) -> Result<EvalReport> {
    let ds = prepare(&load_features(features)?, cfg)?;
    let report = loso_run(&ds, &cfg.loso(), cfg.modality, cfg.seed)?;
    report.write_json(&out.join("report.json"))?;
    report.write_confusion_csv(&out.join("confusion.csv"))?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationKind {
    OcularModules,
    Consensus,
}

impl FromStr for AblationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ocular-modules" => Ok(AblationKind::OcularModules),
            "consensus" => Ok(AblationKind::Consensus),
            other => Err(Error::invalid(format!("unknown ablation {other:?}"))),
        }
    }
}

/// Writes `ablation_ocular.csv` or `ablation_consensus.csv` and returns its path.
pub fn cmd_ablate(features: &Path, out: &Path, cfg: &PipelineConfig, which: AblationKind) -> Result<PathBuf> {
    let ds = prepare(&load_features(features)?, cfg)?;
    let loso = cfg.loso();
    match which {
        AblationKind::OcularModules => {
            let path = out.join("ablation_ocular.csv");
            ablate_ocular(&ds, &loso, cfg.seed, &OcularComponent::ALL)?.write_csv(&path)?;
            Ok(path)
        }
        AblationKind::Consensus => {
            let path = out.join("ablation_consensus.csv");
            ablate_consensus(&ds, &loso, cfg.seed)?.write_csv(&path)?;
            Ok(path)
        }
    }
}

/// Per-phase group trends of the raw features: `trends_<m>.csv`, plus one
/// SVG per feature under `svg/` when requested.
pub fn cmd_trends(features: &Path, out: &Path, cfg: &PipelineConfig, svg: bool) -> Result<Vec<TrendRow>> {
    let ds = load_features(features)?;
    let mut all = Vec::new();
    for m in Modality::ALL {
        let rows = phase_trends(&ds, m, cfg.stats.alpha)?;
        write_trends_csv(&out.join(format!("trends_{m}.csv")), &rows)?;
        if svg {
            for feature in ds.registry(m) {
                let mine: Vec<&TrendRow> = rows.iter().filter(|r| &r.feature == feature).collect();
                if !mine.is_empty() {
                    crate::stats::write_file(&out.join("svg").join(format!("{m}_{feature}.svg")), &trend_svg(feature, &mine))?;
                }
            }
        }
        all.extend(rows);
    }
    Ok(all)
}
