use serde::{Deserialize, Serialize};

use super::beats::BeatSeries;
use super::hrv::{hr_from_ibi, hr_range, mean_nn, pnn, rms_of_diffs};
use crate::error::{Error, Result};
use crate::model::{FeatureTable, FeatureWindow, Phase};
use crate::preprocess::CleanSeries;

pub const CARDIAC_REGISTRY: [&str; 15] = [
    "hr_mean",
    "hr_range",
    "rmssd",
    "mean_nn",
    "pnn50",
    "pnn20",
    "nn_ratio",
    "bvp_min",
    "bvp_max",
    "bvp_mean",
    "bvp_std",
    "bvp_variance",
    "bvp_rms",
    "bvp_skewness",
    "bvp_kurtosis",
];

/// Cardiac features retained for modelling.
pub const FINAL_CARDIAC_FEATURES: [&str; 2] = ["hr_mean", "hr_range"];

pub fn cardiac_registry() -> Vec<String> {
    CARDIAC_REGISTRY.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CardiacWindowConfig {
    pub win_s: f64,
}

impl Default for CardiacWindowConfig {
    fn default() -> Self {
        Self { win_s: 15.0 }
    }
}

/// Population moments of the BVP samples: min, max, mean, std, variance,
/// rms, skewness, excess kurtosis.
fn bvp_stats(vals: &[f64]) -> [Option<f64>; 8] {
    if vals.is_empty() {
        return [None; 8];
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let m2 = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = vals.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    let m4 = vals.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let rms = (vals.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    // a constant trace has no defined shape moments
    let shaped = m2 > 1e-24 * (1.0 + mean * mean);
    [
        vals.iter().copied().reduce(f64::min),
        vals.iter().copied().reduce(f64::max),
        Some(mean),
        Some(m2.sqrt()),
        Some(m2),
        Some(rms),
        shaped.then(|| m3 / m2.powf(1.5)),
        shaped.then(|| m4 / (m2 * m2) - 3.0),
    ]
}

/// Non-overlapping windows over one phase of a participant's recording.
///
/// An interval belongs to the window containing its ending beat. HRV values
/// need at least two beats in the window; RMSSD and pNNx use successive
/// differences between adjacent accepted intervals. `hr_range` is the spread
/// of window `hr_mean` over the whole phase and is repeated on every window.
pub fn window_cardiac(
    participant_id: &str,
    phase: Phase,
    beats: &BeatSeries,
    bvp: &CleanSeries,
    cfg: &CardiacWindowConfig,
) -> Result<FeatureTable> {
    if !(cfg.win_s > 0.0) {
        return Err(Error::invalid("cardiac window length must be positive"));
    }
    let mut table = FeatureTable::new(cardiac_registry());
    if bvp.is_empty() {
        return Ok(table);
    }
    let (t0, t1) = bvp.span();
    let count = ((t1 - t0) / cfg.win_s + 1e-9).floor() as usize;
    let mut rows = Vec::with_capacity(count);
    for k in 0..count {
        let ws = t0 + k as f64 * cfg.win_s;
        let we = ws + cfg.win_s;
        let in_win = |t: f64| t >= ws && t < we;
        let n_beats = beats.beat_times.iter().filter(|&&t| in_win(t)).count();

        let mut values: Vec<Option<f64>> = vec![None; 7];
        if n_beats >= 2 {
            // intervals ending inside the window, in ms
            let idx: Vec<usize> = (0..beats.ibis.len())
                .filter(|&i| in_win(beats.beat_times[i + 1]) && beats.nn_mask[i])
                .collect();
            let nn: Vec<f64> = idx.iter().map(|&i| beats.ibis[i] * 1000.0).collect();
            let diffs: Vec<f64> = idx
                .windows(2)
                .filter(|w| w[1] == w[0] + 1)
                .map(|w| 1000.0 * (beats.ibis[w[1]] - beats.ibis[w[0]]))
                .collect();
            if !nn.is_empty() {
                let secs: Vec<f64> = nn.iter().map(|v| v / 1000.0).collect();
                let mnn = mean_nn(&nn)?;
                values[0] = Some(hr_from_ibi(&secs)?);
                values[3] = Some(mnn);
                if !diffs.is_empty() {
                    let r = rms_of_diffs(&diffs);
                    values[2] = Some(r);
                    values[6] = Some(r / mnn);
                }
                values[4] = pnn(&diffs, 50.0);
                values[5] = pnn(&diffs, 20.0);
            }
        }
        let samples: Vec<f64> = bvp.range(ws, we).filter_map(|i| bvp.observed(i)).collect();
        values.extend(bvp_stats(&samples));
        rows.push((ws, we, values));
    }

    let hrs: Vec<f64> = rows.iter().filter_map(|r| r.2[0]).collect();
    let range = hr_range(&hrs).ok();
    for (k, (ws, we, mut values)) in rows.into_iter().enumerate() {
        values[1] = range;
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cardiac::testutil::pulse_train;
    use crate::cardiac::{detect_beats, BeatConfig};
    use std::f64::consts::PI;

    fn table(schedule: &[f64], duration: f64) -> FeatureTable {
        let bvp = pulse_train(schedule, duration, 64.0);
        let beats = detect_beats(&bvp, &BeatConfig::default()).unwrap();
        window_cardiac("p", Phase::Low, &beats, &bvp, &CardiacWindowConfig::default()).unwrap()
    }

    #[test]
    fn steady_rhythm_windows() {
        let schedule: Vec<f64> = (0..75).map(|k| 0.4 + 0.8 * k as f64).collect();
        let t = table(&schedule, 60.0);
        assert_eq!(t.len(), 4);
        for w in 0..4 {
            assert!((t.value(w, "hr_mean").unwrap() - 75.0).abs() < 1.0);
            assert!(t.value(w, "rmssd").unwrap() < 2.0);
            assert!((t.value(w, "mean_nn").unwrap() - 800.0).abs() < 1.0);
            assert!(t.value(w, "hr_range").unwrap() < 1.0);
            let (sd, var) = (t.value(w, "bvp_std").unwrap(), t.value(w, "bvp_variance").unwrap());
            assert!((sd * sd - var).abs() <= 1e-9 * var);
        }
    }

    #[test]
    fn two_level_rhythm_range() {
        // 30 s at 65 bpm then 30 s at 85 bpm
        let mut schedule = vec![0.3];
        while *schedule.last().unwrap() < 59.5 {
            let t = *schedule.last().unwrap();
            let ibi = if t < 30.0 { 60.0 / 65.0 } else { 60.0 / 85.0 };
            schedule.push(t + ibi);
        }
        let t = table(&schedule, 60.0);
        assert!((t.value(0, "hr_range").unwrap() - 20.0).abs() < 2.0);
    }

    #[test]
    fn sine_moments() {
        let rate = 64.0;
        let n = (60.0 * rate) as usize;
        let v: Vec<f64> = (0..n).map(|i| (2.0 * PI * 1.0 * i as f64 / rate).sin()).collect();
        let bvp = CleanSeries::from_uniform(0.0, rate, v);
        let beats = detect_beats(&bvp, &BeatConfig::default()).unwrap();
        let t = window_cardiac("p", Phase::Low, &beats, &bvp, &CardiacWindowConfig::default()).unwrap();
        for w in 0..t.len() {
            assert!(t.value(w, "bvp_mean").unwrap().abs() < 1e-3);
            assert!((t.value(w, "bvp_rms").unwrap() - 0.5f64.sqrt()).abs() < 1e-3);
            // arcsine law: excess kurtosis -1.5
            assert!((t.value(w, "bvp_kurtosis").unwrap() + 1.5).abs() < 1e-2);
        }
    }

    #[test]
    fn short_stream_has_no_windows() {
        let schedule: Vec<f64> = (0..17).map(|k| 0.4 + 0.8 * k as f64).collect();
        assert_eq!(table(&schedule, 14.0).len(), 0);
    }

    #[test]
    fn sparse_window_has_missing_hrv() {
        let beats = BeatSeries::from_times(vec![1.0, 20.0], &BeatConfig::default());
        let bvp = CleanSeries::from_uniform(0.0, 64.0, (0..64 * 30).map(|i| (i as f64 * 0.1).sin()).collect());
        let t = window_cardiac("p", Phase::Low, &beats, &bvp, &CardiacWindowConfig::default()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.value(0, "hr_mean"), None);
        assert_eq!(t.value(0, "hr_range"), None);
        assert!(t.value(0, "bvp_mean").is_some());
    }
}
