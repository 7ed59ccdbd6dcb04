use serde::{Deserialize, Serialize};

use super::events::{EventKind, OcularEvent};
use crate::error::{Error, Result};
use crate::model::{AoiRect, FeatureTable, FeatureWindow, Phase};
use crate::preprocess::CleanSeries;

const PUPIL_STATS: [&str; 4] = ["mean", "std", "min", "max"];
const EVENT_FEATURES: [&str; 11] = [
    "saccade_count_mean",
    "saccade_rate",
    "saccade_amplitude_mean",
    "saccade_amplitude_max",
    "saccade_velocity_max",
    "saccade_fixation_ratio",
    "fixation_duration_mean",
    "fixation_duration_max",
    "fixation_duration_sum",
    "fixation_count",
    "fixation_rate",
];

/// Ocular features retained for modelling.
pub const FINAL_OCULAR_FEATURES: [&str; 10] = [
    "saccade_count_mean",
    "saccade_rate",
    "saccade_amplitude_mean",
    "saccade_amplitude_max",
    "saccade_velocity_max",
    "saccade_fixation_ratio",
    "aoi_hand_cards_proportion",
    "aoi_hand_cards_rate",
    "aoi_potion_bar_proportion",
    "aoi_potion_bar_rate",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OcularWindowConfig {
    pub win_s: f64,
    pub step_s: f64,
}

impl Default for OcularWindowConfig {
    fn default() -> Self {
        Self { win_s: 0.5, step_s: 0.25 }
    }
}

/// Full ocular feature registry for the given AOIs, in column order.
pub fn ocular_registry(aois: &[AoiRect]) -> Vec<String> {
    let mut names = Vec::new();
    for eye in ["left", "right", "avg"] {
        for s in PUPIL_STATS {
            names.push(format!("pupil_{eye}_{s}"));
        }
    }
    names.extend(EVENT_FEATURES.iter().map(|s| s.to_string()));
    for a in aois {
        names.push(format!("aoi_{}_proportion", a.name));
        names.push(format!("aoi_{}_rate", a.name));
    }
    names
}

/// Window starts `t0 + k * step` for every window that fits in `[t0, t1)`.
pub fn window_starts(t0: f64, t1: f64, win_s: f64, step_s: f64) -> Vec<f64> {
    let span = t1 - t0;
    if span + 1e-9 < win_s {
        return Vec::new();
    }
    let count = ((span - win_s) / step_s + 1e-9).floor() as usize + 1;
    (0..count).map(|k| t0 + k as f64 * step_s).collect()
}

/// Cleaned pupil traces on the gaze grid; `None` when an eye never reported.
#[derive(Debug, Clone, Default)]
pub struct PupilTrack {
    pub left: Option<CleanSeries>,
    pub right: Option<CleanSeries>,
}

fn push_stats(out: &mut Vec<Option<f64>>, vals: &[f64]) {
    if vals.is_empty() {
        out.extend([None; 4]);
        return;
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    out.push(Some(mean));
    out.push(Some(var.sqrt()));
    out.push(Some(vals.iter().copied().fold(f64::INFINITY, f64::min)));
    out.push(Some(vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)));
}

fn pupil_values(track: &Option<CleanSeries>, ws: f64, we: f64) -> Vec<Option<f64>> {
    match track {
        Some(s) => s.range(ws, we).map(|i| s.observed(i)).collect(),
        None => Vec::new(),
    }
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn max(v: &[f64]) -> Option<f64> {
    v.iter().copied().reduce(f64::max)
}

/// Sliding-window ocular features over one phase.
///
/// Gaze `x`/`y` share the grid of `events`; a gaze sample counts as valid
/// when it was observed before interpolation. Pupil statistics use the
/// population standard deviation.
#[allow(clippy::too_many_arguments)]
pub fn window_ocular(
    participant_id: &str,
    phase: Phase,
    events: &[OcularEvent],
    pupil: &PupilTrack,
    x: &CleanSeries,
    y: &CleanSeries,
    aois: &[AoiRect],
    cfg: &OcularWindowConfig,
) -> Result<FeatureTable> {
    if !(cfg.win_s > 0.0 && cfg.step_s > 0.0) {
        return Err(Error::invalid("window length and step must be positive"));
    }
    if x.len() != y.len() {
        return Err(Error::data("gaze x and y are not aligned"));
    }
    let mut table = FeatureTable::new(ocular_registry(aois));
    let (t0, t1) = x.span();
    if x.is_empty() {
        return Ok(table);
    }
    let onsets: Vec<f64> = events.iter().map(|e| e.t_start).collect();

    for (k, ws) in window_starts(t0, t1, cfg.win_s, cfg.step_s).into_iter().enumerate() {
        let we = ws + cfg.win_s;
        let mut values = Vec::with_capacity(table.registry().len());

        let left = pupil_values(&pupil.left, ws, we);
        let right = pupil_values(&pupil.right, ws, we);
        push_stats(&mut values, &left.iter().flatten().copied().collect::<Vec<_>>());
        push_stats(&mut values, &right.iter().flatten().copied().collect::<Vec<_>>());
        let len = left.len().max(right.len());
        let avg: Vec<f64> = (0..len)
            .filter_map(|i| {
                let l = left.get(i).copied().flatten();
                let r = right.get(i).copied().flatten();
                match (l, r) {
                    (Some(a), Some(b)) => Some(0.5 * (a + b)),
                    (a, b) => a.or(b),
                }
            })
            .collect();
        push_stats(&mut values, &avg);

        let idx = x.range(ws, we);
        let valid: Vec<usize> = idx.clone().filter(|&i| !x.gap_mask[i] && !y.gap_mask[i]).collect();
        if valid.is_empty() {
            values.extend(std::iter::repeat_n(None, EVENT_FEATURES.len() + 2 * aois.len()));
        } else {
            let lo = onsets.partition_point(|&t| t < ws - 1e-9);
            let hi = onsets.partition_point(|&t| t < we - 1e-9);
            let started = &events[lo..hi];
            let sacc: Vec<&OcularEvent> = started.iter().filter(|e| e.kind == EventKind::Saccade).collect();
            let fix: Vec<&OcularEvent> = started.iter().filter(|e| e.kind == EventKind::Fixation).collect();
            let amps: Vec<f64> = sacc.iter().filter_map(|e| e.amplitude_deg).collect();
            let peaks: Vec<f64> = sacc.iter().filter_map(|e| e.peak_velocity_dps).collect();
            let durs: Vec<f64> = fix.iter().map(|e| e.duration).collect();

            let (mut t_sacc, mut t_fix) = (0.0, 0.0);
            let first = events.partition_point(|e| e.t_end <= ws);
            for e in events[first..].iter().take_while(|e| e.t_start < we) {
                let overlap = e.t_end.min(we) - e.t_start.max(ws);
                if overlap > 0.0 {
                    match e.kind {
                        EventKind::Saccade => t_sacc += overlap,
                        EventKind::Fixation => t_fix += overlap,
                    }
                }
            }

            let n_sacc = sacc.len() as f64;
            let n_fix = fix.len() as f64;
            values.push(Some(n_sacc));
            values.push(Some(n_sacc / cfg.win_s));
            values.push(mean(&amps));
            values.push(max(&amps));
            values.push(max(&peaks));
            values.push((t_fix > 1e-12).then(|| t_sacc / t_fix));
            values.push(mean(&durs));
            values.push(max(&durs));
            values.push(Some(durs.iter().sum()));
            values.push(Some(n_fix));
            values.push(Some(n_fix / cfg.win_s));

            for a in aois {
                let mut inside = 0usize;
                let mut entries = 0usize;
                let mut was_inside = false;
                for &i in &valid {
                    let hit = a.contains(x.v[i], y.v[i]);
                    if hit {
                        inside += 1;
                        if !was_inside {
                            entries += 1;
                        }
                    }
                    was_inside = hit;
                }
                values.push(Some(inside as f64 / valid.len() as f64));
                values.push(Some(entries as f64 / cfg.win_s));
            }
        }

        table.push(FeatureWindow {
            participant_id: participant_id.to_string(),
            phase,
            window_index: k,
            t_start: ws,
            t_end: we,
            values,
        })?;
    }
    Ok(table)
}
