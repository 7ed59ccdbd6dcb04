//! Heartbeat detection, inter-beat intervals and 15 s cardiac features.

mod beats;
mod hrv;
mod windows;

pub use beats::{detect_beats, BeatConfig, BeatSeries};
pub use hrv::{hr_from_ibi, hr_range, mean_nn, pnn, rmssd};
pub use windows::{
    cardiac_registry, window_cardiac, CardiacWindowConfig, CARDIAC_REGISTRY, FINAL_CARDIAC_FEATURES,
};

#[cfg(test)]
pub(crate) mod testutil {
    use crate::preprocess::CleanSeries;

    /// Gaussian pulses of width 80 ms at the given beat times.
    pub fn pulse_train(beats: &[f64], duration: f64, rate: f64) -> CleanSeries {
        let n = (duration * rate).round() as usize;
        let v = (0..n)
            .map(|i| {
                let t = i as f64 / rate;
                beats
                    .iter()
                    .filter(|&&b| (t - b).abs() < 0.5)
                    .map(|&b| (-0.5 * ((t - b) / 0.08).powi(2)).exp())
                    .sum()
            })
            .collect();
        CleanSeries::from_uniform(0.0, rate, v)
    }
}
