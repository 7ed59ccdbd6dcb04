use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cardiac::{cardiac_registry, detect_beats, window_cardiac, BeatConfig, CardiacWindowConfig};
use crate::error::{Error, Result, ResultExt};
use crate::model::{
    load_bvp, load_gaze, BvpSample, Dataset, FeatureTable, GazeSample, LoadOptions, ParticipantRecord, Phase,
    SessionManifest, BVP_RATE_HZ, GAZE_RATE_HZ,
};
use crate::ocular::{
    detect_events, ocular_registry, point_velocity, window_ocular, DetectorConfig, OcularWindowConfig, PupilTrack,
};
use crate::preprocess::{
    interpolate_gaps, resample_uniform, segment_by_phase, CleanSeries, FilterConfig, InterpConfig, SgConfig,
};

/// Shortest BVP span the beat detector accepts.
const MIN_BVP_SPAN_S: f64 = 5.0;

/// Everything between raw recordings and window tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractConfig {
    pub pupil: FilterConfig,
    pub bvp: FilterConfig,
    pub sg: SgConfig,
    pub interp: InterpConfig,
    pub ocular: DetectorConfig,
    pub ibi: BeatConfig,
    pub ocular_windows: OcularWindowConfig,
    pub cardiac_windows: CardiacWindowConfig,
    /// Largest backwards timestamp step tolerated when loading (s).
    pub timestamp_jitter_s: f64,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            pupil: FilterConfig::pupil(),
            bvp: FilterConfig::bvp(),
            sg: SgConfig::default(),
            interp: InterpConfig::default(),
            ocular: DetectorConfig::default(),
            ibi: BeatConfig::default(),
            ocular_windows: OcularWindowConfig::default(),
            cardiac_windows: CardiacWindowConfig::default(),
            timestamp_jitter_s: LoadOptions::default().jitter_s,
        }
    }
}

impl ExtractConfig {
    pub fn validate(&self) -> Result<()> {
        self.ocular.validate()?;
        self.ibi.validate()?;
        for f in [&self.pupil, &self.bvp] {
            if !(f.cutoff_hz > 0.0) || f.order == 0 {
                return Err(Error::invalid("filter cutoff and order must be positive"));
            }
        }
        if self.sg.window.is_multiple_of(2) || self.sg.polyorder >= self.sg.window {
            return Err(Error::invalid("Savitzky-Golay window must be odd and exceed the polynomial order"));
        }
        if !(self.interp.max_gap_s >= 0.0) || !(self.timestamp_jitter_s >= 0.0) {
            return Err(Error::invalid("interpolation cap and timestamp jitter must be non-negative"));
        }
        if !(self.ocular_windows.win_s > 0.0 && self.ocular_windows.step_s > 0.0 && self.cardiac_windows.win_s > 0.0) {
            return Err(Error::invalid("window lengths and steps must be positive"));
        }
        Ok(())
    }
}

fn clean(t: &[f64], v: &[Option<f64>], rate: f64, cfg: &ExtractConfig) -> Result<Option<CleanSeries>> {
    if v.iter().all(Option::is_none) {
        return Ok(None);
    }
    let grid = resample_uniform(t, v, rate)?;
    Ok(Some(interpolate_gaps(&grid, cfg.interp.max_gap_s)?.series))
}

fn ocular_phase(
    manifest: &SessionManifest,
    phase: Phase,
    samples: &[GazeSample],
    cfg: &ExtractConfig,
) -> Result<Option<FeatureTable>> {
    let id = &manifest.participant_id;
    let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let on_screen = |s: &GazeSample| s.position().filter(|&(x, y)| manifest.geometry.contains(x, y));
    let xs: Vec<Option<f64>> = samples.iter().map(|s| on_screen(s).map(|p| p.0)).collect();
    let ys: Vec<Option<f64>> = samples.iter().map(|s| on_screen(s).map(|p| p.1)).collect();
    let (Some(x), Some(y)) = (clean(&t, &xs, GAZE_RATE_HZ, cfg)?, clean(&t, &ys, GAZE_RATE_HZ, cfg)?) else {
        log::warn!("{id}: no on-screen gaze in phase {phase}, skipping ocular windows");
        return Ok(None);
    };
    let pupil_track = |pick: fn(&GazeSample) -> Option<f64>| -> Result<Option<CleanSeries>> {
        let v: Vec<Option<f64>> = samples.iter().map(pick).collect();
        clean(&t, &v, GAZE_RATE_HZ, cfg)?.map(|s| cfg.pupil.apply(&s)).transpose()
    };
    let pupil = PupilTrack {
        left: pupil_track(GazeSample::left_pupil).context(|| "pupil cleaning".into())?,
        right: pupil_track(GazeSample::right_pupil).context(|| "pupil cleaning".into())?,
    };
    let velocity = point_velocity(&x, &y, &manifest.geometry, &cfg.sg).context(|| "gaze velocity".into())?;
    let events = detect_events(&velocity, &x, &y, &manifest.geometry, &cfg.ocular)
        .context(|| "event detection".into())?;
    window_ocular(id, phase, &events, &pupil, &x, &y, &manifest.aois, &cfg.ocular_windows)
        .context(|| "ocular windowing".into())
        .map(Some)
}

fn cardiac_phase(
    manifest: &SessionManifest,
    phase: Phase,
    samples: &[BvpSample],
    cfg: &ExtractConfig,
) -> Result<Option<FeatureTable>> {
    let id = &manifest.participant_id;
    let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let v: Vec<Option<f64>> = samples.iter().map(|s| Some(s.value).filter(|v| v.is_finite())).collect();
    let Some(series) = clean(&t, &v, BVP_RATE_HZ, cfg)? else {
        log::warn!("{id}: no BVP in phase {phase}, skipping cardiac windows");
        return Ok(None);
    };
    let (t0, t1) = series.span();
    if t1 - t0 < MIN_BVP_SPAN_S {
        log::warn!("{id}: phase {phase} holds {:.1} s of BVP, too short for beat detection", t1 - t0);
        return Ok(None);
    }
    let filtered = cfg.bvp.apply(&series).context(|| "BVP filtering".into())?;
    let beats = detect_beats(&filtered, &cfg.ibi).context(|| "beat detection".into())?;
    window_cardiac(id, phase, &beats, &filtered, &cfg.cardiac_windows)
        .context(|| "cardiac windowing".into())
        .map(Some)
}

/// Window tables for one session. Errors name the participant and stage.
pub fn extract_participant(manifest: &SessionManifest, manifest_dir: &Path, cfg: &ExtractConfig) -> Result<ParticipantRecord> {
    let id = manifest.participant_id.clone();
    let opts = LoadOptions { jitter_s: cfg.timestamp_jitter_s };
    let gaze = load_gaze(&manifest.resolve(manifest_dir, &manifest.gaze_path), &opts)
        .context(|| format!("participant {id}: loading gaze"))?;
    let bvp = load_bvp(&manifest.resolve(manifest_dir, &manifest.bvp_path), &opts)
        .context(|| format!("participant {id}: loading BVP"))?;
    let gaze = segment_by_phase(&gaze, manifest);
    let bvp = segment_by_phase(&bvp, manifest);
    for w in gaze.warnings.iter().chain(&bvp.warnings) {
        log::warn!("{w}");
    }
    let mut ocular = FeatureTable::new(ocular_registry(&manifest.aois));
    let mut cardiac = FeatureTable::new(cardiac_registry());
    for phase in Phase::ALL {
        if let Some(t) = ocular_phase(manifest, phase, gaze.get(phase), cfg)
            .context(|| format!("participant {id}: ocular extraction, phase {phase}"))?
        {
            ocular.extend(t)?;
        }
        if let Some(t) = cardiac_phase(manifest, phase, bvp.get(phase), cfg)
            .context(|| format!("participant {id}: cardiac extraction, phase {phase}"))?
        {
            cardiac.extend(t)?;
        }
    }
    Ok(ParticipantRecord { id, label: manifest.label, ocular, cardiac })
}

/// Every `*.json` manifest in `dir`, sorted by file name.
pub fn manifest_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::data(format!("no session manifests in {}", dir.display())));
    }
    Ok(paths)
}

/// Extracts every manifest in `dir`; participants are processed in parallel
/// and returned sorted by id.
pub fn extract_dir(dir: &Path, cfg: &ExtractConfig) -> Result<Dataset> {
    cfg.validate()?;
    let paths = manifest_paths(dir)?;
    let mut records = paths
        .par_iter()
        .map(|path| {
            let manifest = SessionManifest::load(path)?;
            let base = path.parent().unwrap_or(dir);
            extract_participant(&manifest, base, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = records.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::invalid(format!("participant {} appears in two manifests", w[0].id)));
    }
    Dataset::new(records)
}
