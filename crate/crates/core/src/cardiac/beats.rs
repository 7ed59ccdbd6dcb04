use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::CleanSeries;

/// Beat detector and IBI gate parameters (`bvp.*`, `ibi.*` config keys).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeatConfig {
    pub peak_k: f64,
    pub refractory_s: f64,
    pub threshold_window_s: f64,
    pub ibi_min_s: f64,
    pub ibi_max_s: f64,
}

impl Default for BeatConfig {
    fn default() -> Self {
        Self {
            peak_k: 0.5,
            refractory_s: 0.27,
            threshold_window_s: 2.0,
            ibi_min_s: 0.27,
            ibi_max_s: 2.0,
        }
    }
}

impl BeatConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.refractory_s > 0.0
            && self.threshold_window_s > 0.0
            && self.ibi_min_s > 0.0
            && self.ibi_max_s > self.ibi_min_s)
        {
            return Err(Error::invalid(
                "beat detector needs positive refractory/threshold windows and ibi_min < ibi_max",
            ));
        }
        Ok(())
    }
}

/// Detected beats and the intervals between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeatSeries {
    /// Strictly increasing beat times (s).
    pub beat_times: Vec<f64>,
    /// `ibis[i] = beat_times[i + 1] - beat_times[i]` (s).
    pub ibis: Vec<f64>,
    /// False for intervals rejected by the physiological gate or spanning
    /// an unrecoverable gap.
    pub nn_mask: Vec<bool>,
}

impl BeatSeries {
    pub fn from_times(beat_times: Vec<f64>, cfg: &BeatConfig) -> Self {
        let ibis: Vec<f64> = beat_times.windows(2).map(|w| w[1] - w[0]).collect();
        let nn_mask = ibis
            .iter()
            .map(|&i| i >= cfg.ibi_min_s - 1e-12 && i <= cfg.ibi_max_s + 1e-12)
            .collect();
        BeatSeries {
            beat_times,
            ibis,
            nn_mask,
        }
    }

    pub fn flagged(&self) -> usize {
        self.nn_mask.iter().filter(|&&ok| !ok).count()
    }

    /// Accepted intervals in seconds.
    pub fn nn(&self) -> Vec<f64> {
        self.ibis
            .iter()
            .zip(&self.nn_mask)
            .filter(|(_, &ok)| ok)
            .map(|(&i, _)| i)
            .collect()
    }
}

/// Centred rolling mean and population sd over `half` samples each side.
fn rolling_stats(v: &[f64], half: usize) -> (Vec<f64>, Vec<f64>) {
    let n = v.len();
    let mut s1 = vec![0.0; n + 1];
    let mut s2 = vec![0.0; n + 1];
    for i in 0..n {
        s1[i + 1] = s1[i] + v[i];
        s2[i + 1] = s2[i] + v[i] * v[i];
    }
    let mut mean = vec![0.0; n];
    let mut sd = vec![0.0; n];
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        let len = (hi - lo) as f64;
        let m = (s1[hi] - s1[lo]) / len;
        mean[i] = m;
        sd[i] = ((s2[hi] - s2[lo]) / len - m * m).max(0.0).sqrt();
    }
    (mean, sd)
}

/// Systolic peak detection on a filtered BVP trace.
///
/// A peak is a local maximum above `rolling mean + peak_k * rolling sd`; of
/// two peaks closer than the refractory period the larger is kept. Peak times
/// are refined by parabolic interpolation.
pub fn detect_beats(bvp: &CleanSeries, cfg: &BeatConfig) -> Result<BeatSeries> {
    cfg.validate()?;
    let n = bvp.len();
    let dt = bvp.dt();
    if (n as f64) * dt < 5.0 - 1e-9 {
        return Err(Error::data(format!(
            "beat detection needs at least 5 s of signal, got {:.2} s",
            n as f64 * dt
        )));
    }
    let v = &bvp.v;
    let half = ((cfg.threshold_window_s / 2.0) / dt).round() as usize;
    let (mean, sd) = rolling_stats(v, half);

    let mut peaks: Vec<usize> = Vec::new();
    for i in 1..n - 1 {
        let is_peak = v[i] > v[i - 1] && v[i] >= v[i + 1] && v[i] > mean[i] + cfg.peak_k * sd[i];
        if !is_peak || bvp.unfilled[i] {
            continue;
        }
        match peaks.last() {
            Some(&p) if (i - p) as f64 * dt < cfg.refractory_s => {
                if v[i] > v[p] {
                    *peaks.last_mut().unwrap() = i;
                }
            }
            _ => peaks.push(i),
        }
    }
    if peaks.is_empty() {
        return Err(Error::data("no peaks found in BVP signal"));
    }

    let times: Vec<f64> = peaks
        .iter()
        .map(|&i| {
            let (a, b, c) = (v[i - 1], v[i], v[i + 1]);
            let denom = a - 2.0 * b + c;
            let off = if denom.abs() > 1e-300 { 0.5 * (a - c) / denom } else { 0.0 };
            bvp.t[i] + off.clamp(-0.5, 0.5) * dt
        })
        .collect();
    let mut beats = BeatSeries::from_times(times, cfg);
    for (k, w) in peaks.windows(2).enumerate() {
        if bvp.unfilled[w[0]..w[1]].iter().any(|&u| u) {
            beats.nn_mask[k] = false;
        }
    }
    Ok(beats)
}
