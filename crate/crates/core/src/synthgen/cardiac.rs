use rand::RngCore;
use rand_distr::{Distribution, Normal};

use crate::model::BvpSample;

const IBI_MIN_S: f64 = 0.3;
const IBI_MAX_S: f64 = 1.9;

/// Beat times over `[0, duration_s)`. Each interval is `60 / hr(t)` plus
/// Gaussian jitter, `t` being the beat that opens it.
pub fn plan_beats(
    duration_s: f64,
    hr_at: impl Fn(f64) -> f64,
    ibi_sd_at: impl Fn(f64) -> f64,
    rng: &mut dyn RngCore,
) -> Vec<f64> {
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut beats = Vec::new();
    let mut t = 0.4;
    while t < duration_s {
        beats.push(t);
        let ibi = 60.0 / hr_at(t) + ibi_sd_at(t) * unit.sample(rng);
        t += ibi.clamp(IBI_MIN_S, IBI_MAX_S);
    }
    beats
}

/// Blood volume pulse: a Gaussian pulse per beat on a slow baseline wander,
/// plus white noise.
pub fn render_bvp(
    beats: &[f64],
    n_samples: usize,
    rate_hz: f64,
    sigma_s: f64,
    amplitude_at: impl Fn(f64) -> f64,
    noise_sd: f64,
    rng: &mut dyn RngCore,
) -> Vec<BvpSample> {
    let mut v: Vec<f64> = (0..n_samples)
        .map(|i| 0.1 * (std::f64::consts::TAU * 0.05 * i as f64 / rate_hz).sin())
        .collect();
    let reach = 5.0 * sigma_s;
    for &b in beats {
        let a = amplitude_at(b);
        let lo = ((b - reach) * rate_hz).ceil().max(0.0) as usize;
        let hi = (((b + reach) * rate_hz).floor() as usize).min(n_samples.saturating_sub(1));
        for (i, slot) in v.iter_mut().enumerate().take(hi + 1).skip(lo) {
            let dt = i as f64 / rate_hz - b;
            *slot += a * (-0.5 * (dt / sigma_s).powi(2)).exp();
        }
    }
    if noise_sd > 0.0 {
        let noise = Normal::new(0.0, noise_sd).expect("noise validated");
        for slot in &mut v {
            *slot += noise.sample(rng);
        }
    }
    v.into_iter()
        .enumerate()
        .map(|(i, value)| BvpSample { t: i as f64 / rate_hz, value })
        .collect()
}
