use super::{check_rate, CleanSeries};
use crate::error::{Error, Result};

/// A uniformly sampled signal that may have missing values.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub rate_hz: f64,
    pub t: Vec<f64>,
    pub v: Vec<Option<f64>>,
}

/// Resamples irregular `(t, v)` onto `t[0] + k / rate_hz` by linear
/// interpolation. A grid point is missing when either bracketing raw sample
/// is missing or the raw samples are more than 2.5 nominal periods apart.
pub fn resample_uniform(t: &[f64], v: &[Option<f64>], rate_hz: f64) -> Result<Series> {
    check_rate(rate_hz)?;
    assert_eq!(t.len(), v.len());
    let Some((&t0, &t_last)) = t.first().zip(t.last()) else {
        return Ok(Series { rate_hz, t: vec![], v: vec![] });
    };
    let dt = 1.0 / rate_hz;
    let max_bridge = 2.5 * dt;
    let tol = 1e-6 * dt;
    let n = ((t_last - t0) * rate_hz + 1e-6).floor() as usize + 1;

    let mut grid_t = Vec::with_capacity(n);
    let mut grid_v = Vec::with_capacity(n);
    let mut i = 0usize;
    for k in 0..n {
        let g = t0 + k as f64 * dt;
        while i + 1 < t.len() && t[i + 1] <= g + tol {
            i += 1;
        }
        let value = if (t[i] - g).abs() <= tol {
            v[i]
        } else if i + 1 < t.len() {
            match (v[i], v[i + 1]) {
                (Some(a), Some(b)) if t[i + 1] - t[i] <= max_bridge => {
                    let w = (g - t[i]) / (t[i + 1] - t[i]);
                    Some(a + w * (b - a))
                }
                _ => None,
            }
        } else {
            None
        };
        grid_t.push(g);
        grid_v.push(value);
    }
    Ok(Series { rate_hz, t: grid_t, v: grid_v })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapFill {
    pub series: CleanSeries,
    /// Interior runs `[start, end)` longer than the cap.
    pub long_runs: Vec<(usize, usize)>,
}

/// Linearly bridges interior gaps up to `max_gap_s`, holds the nearest value
/// across leading and trailing gaps, and reports longer interior gaps.
pub fn interpolate_gaps(series: &Series, max_gap_s: f64) -> Result<GapFill> {
    check_rate(series.rate_hz)?;
    let n = series.v.len();
    let present: Vec<usize> = (0..n).filter(|&i| series.v[i].is_some()).collect();
    let (Some(&first), Some(&last)) = (present.first(), present.last()) else {
        return Err(Error::data("cannot interpolate an all-missing series"));
    };
    let dt = 1.0 / series.rate_hz;
    let mut v = vec![0.0; n];
    let gap_mask: Vec<bool> = series.v.iter().map(Option::is_none).collect();
    let mut unfilled = vec![false; n];
    let mut long_runs = Vec::new();

    let first_v = series.v[first].unwrap();
    let last_v = series.v[last].unwrap();
    v[..first].fill(first_v);
    v[last..].fill(last_v);
    for w in present.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (va, vb) = (series.v[a].unwrap(), series.v[b].unwrap());
        v[a] = va;
        if b > a + 1 {
            let missing = b - a - 1;
            for (k, slot) in v.iter_mut().enumerate().take(b).skip(a + 1) {
                let frac = (k - a) as f64 / (b - a) as f64;
                *slot = va + frac * (vb - va);
            }
            if missing as f64 * dt > max_gap_s + 1e-9 {
                unfilled[a + 1..b].fill(true);
                long_runs.push((a + 1, b));
            }
        }
    }
    v[last] = last_v;

    Ok(GapFill {
        series: CleanSeries {
            rate_hz: series.rate_hz,
            t: series.t.clone(),
            v,
            gap_mask,
            unfilled,
        },
        long_runs,
    })
}
