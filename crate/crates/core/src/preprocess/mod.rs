//! Cleaning chain for pupil, gaze and BVP signals.
//!
//! Pupil: resample, interpolate blink gaps, 4 Hz low-pass.
//! Gaze: drop off-screen samples, resample, interpolate; velocity smoothing
//! happens downstream in [`crate::ocular`].
//! BVP: resample, 3 Hz zero-phase low-pass.

mod butterworth;
mod interp;
mod savgol;
mod segment;

pub use butterworth::{butterworth_lowpass, Butterworth};
pub use interp::{interpolate_gaps, resample_uniform, GapFill, Series};
pub use savgol::{savgol_apply, savgol_coefficients, savitzky_golay};
pub use segment::{drop_offscreen, segment_by_phase, Segmented};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A gap-free signal on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanSeries {
    pub rate_hz: f64,
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    /// True on samples that were missing before interpolation.
    pub gap_mask: Vec<bool>,
    /// True on samples inside gaps longer than the interpolation cap. Their
    /// values are a linear bridge and must be treated as missing by feature code.
    pub unfilled: Vec<bool>,
}

impl CleanSeries {
    /// Wraps fully observed samples on the grid `t0 + i / rate_hz`.
    pub fn from_uniform(t0: f64, rate_hz: f64, v: Vec<f64>) -> Self {
        let n = v.len();
        CleanSeries {
            rate_hz,
            t: (0..n).map(|i| t0 + i as f64 / rate_hz).collect(),
            v,
            gap_mask: vec![false; n],
            unfilled: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.rate_hz
    }

    /// Same grid and masks, new values.
    pub fn with_values(&self, v: Vec<f64>) -> Self {
        debug_assert_eq!(v.len(), self.v.len());
        CleanSeries {
            v,
            ..self.clone()
        }
    }

    /// Value usable for features (not inside an unfilled gap).
    pub fn observed(&self, i: usize) -> Option<f64> {
        (!self.unfilled[i]).then_some(self.v[i])
    }

    /// Index range of samples with `t_start <= t < t_end`.
    pub fn range(&self, t_start: f64, t_end: f64) -> std::ops::Range<usize> {
        let lo = self.t.partition_point(|&t| t < t_start);
        let hi = self.t.partition_point(|&t| t < t_end);
        lo..hi.max(lo)
    }

    /// Recording span covered by the grid, counting the last sample period.
    pub fn span(&self) -> (f64, f64) {
        match (self.t.first(), self.t.last()) {
            (Some(&a), Some(&b)) => (a, b + self.dt()),
            _ => (0.0, 0.0),
        }
    }
}

/// Preprocessing parameters (`pupil.*`, `bvp.*`, `sg.*`, `interp.*`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    pub cutoff_hz: f64,
    pub order: usize,
    pub zero_phase: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SgConfig {
    pub window: usize,
    pub polyorder: usize,
}

impl Default for SgConfig {
    fn default() -> Self {
        Self {
            window: 13,
            polyorder: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterpConfig {
    pub max_gap_s: f64,
}

impl Default for InterpConfig {
    fn default() -> Self {
        Self { max_gap_s: 0.5 }
    }
}

impl FilterConfig {
    pub fn pupil() -> Self {
        Self {
            cutoff_hz: 4.0,
            order: 4,
            zero_phase: false,
        }
    }

    pub fn bvp() -> Self {
        Self {
            cutoff_hz: 3.0,
            order: 6,
            zero_phase: true,
        }
    }

    pub fn apply(&self, series: &CleanSeries) -> Result<CleanSeries> {
        butterworth_lowpass(series, self.order, self.cutoff_hz, self.zero_phase)
    }
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self::pupil()
    }
}

pub(crate) fn check_rate(rate_hz: f64) -> Result<()> {
    if rate_hz.is_finite() && rate_hz > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("sample rate must be positive, got {rate_hz}")))
    }
}
