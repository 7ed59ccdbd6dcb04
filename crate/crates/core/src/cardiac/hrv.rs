use crate::error::{Error, Result};

/// Mean of per-beat heart rates `60 / ibi` (bpm).
pub fn hr_from_ibi(ibis_s: &[f64]) -> Result<f64> {
    if ibis_s.is_empty() {
        return Err(Error::data("heart rate of an empty interval set"));
    }
    if ibis_s.iter().any(|&i| !(i > 0.0)) {
        return Err(Error::data("inter-beat intervals must be positive"));
    }
    Ok(ibis_s.iter().map(|i| 60.0 / i).sum::<f64>() / ibis_s.len() as f64)
}

/// Root mean square of successive differences (same unit as the input).
pub fn rmssd(nn: &[f64]) -> Result<f64> {
    if nn.len() < 2 {
        return Err(Error::data(format!("RMSSD needs at least 2 NN intervals, got {}", nn.len())));
    }
    Ok(rms_of_diffs(&successive_diffs(nn)))
}

pub(crate) fn successive_diffs(nn: &[f64]) -> Vec<f64> {
    nn.windows(2).map(|w| w[1] - w[0]).collect()
}

pub(crate) fn rms_of_diffs(d: &[f64]) -> f64 {
    (d.iter().map(|x| x * x).sum::<f64>() / d.len() as f64).sqrt()
}

pub fn mean_nn(nn: &[f64]) -> Result<f64> {
    if nn.is_empty() {
        return Err(Error::data("mean NN of an empty interval set"));
    }
    Ok(nn.iter().sum::<f64>() / nn.len() as f64)
}

/// Fraction of successive differences whose magnitude exceeds `threshold`.
pub fn pnn(diffs: &[f64], threshold: f64) -> Option<f64> {
    if diffs.is_empty() {
        return None;
    }
    Some(diffs.iter().filter(|d| d.abs() > threshold).count() as f64 / diffs.len() as f64)
}

/// Max minus min of window heart rates.
pub fn hr_range(hr: &[f64]) -> Result<f64> {
    let max = hr.iter().copied().reduce(f64::max);
    let min = hr.iter().copied().reduce(f64::min);
    match (max, min) {
        (Some(a), Some(b)) => Ok(a - b),
        _ => Err(Error::data("heart-rate range of an empty window set")),
    }
}
