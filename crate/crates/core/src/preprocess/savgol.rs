use nalgebra::{DMatrix, DVector};

use super::CleanSeries;
use crate::error::{Error, Result};

fn check(window: usize, polyorder: usize) -> Result<()> {
    if window.is_multiple_of(2) || window <= polyorder {
        return Err(Error::invalid(format!(
            "Savitzky-Golay window must be odd and exceed the polynomial order (window {window}, order {polyorder})"
        )));
    }
    Ok(())
}

/// Least-squares weights that evaluate a degree-`polyorder` fit over
/// `window` consecutive samples at sample position `pos` (0-based).
pub fn savgol_coefficients(window: usize, polyorder: usize, pos: usize) -> Result<Vec<f64>> {
    check(window, polyorder)?;
    if pos >= window {
        return Err(Error::invalid(format!("evaluation position {pos} outside window {window}")));
    }
    let half = (window / 2) as f64;
    // Offsets scaled to [-1, 1] keep the Vandermonde matrix well conditioned.
    let scale = half.max(1.0);
    let vander = DMatrix::from_fn(window, polyorder + 1, |r, c| {
        ((r as f64 - half) / scale).powi(c as i32)
    });
    let at = (pos as f64 - half) / scale;
    let target = DVector::from_fn(polyorder + 1, |c, _| at.powi(c as i32));
    // weights = V (VᵀV)⁻¹ e  with e the monomials at `pos`
    let gram = vander.transpose() * &vander;
    let solved = gram
        .cholesky()
        .ok_or_else(|| Error::invalid("singular Savitzky-Golay system"))?
        .solve(&target);
    Ok((vander * solved).iter().copied().collect())
}

/// Smooths `x`; the first and last `window / 2` samples are evaluated on the
/// fit of the first / last full window.
pub fn savgol_apply(x: &[f64], window: usize, polyorder: usize) -> Result<Vec<f64>> {
    check(window, polyorder)?;
    let n = x.len();
    if n < window {
        return Err(Error::data(format!(
            "Savitzky-Golay needs at least {window} samples, got {n}"
        )));
    }
    let half = window / 2;
    let center = savgol_coefficients(window, polyorder, half)?;
    let mut y = vec![0.0; n];
    for i in half..n - half {
        y[i] = center
            .iter()
            .zip(&x[i - half..=i + half])
            .map(|(c, v)| c * v)
            .sum();
    }
    for pos in 0..half {
        let w = savgol_coefficients(window, polyorder, pos)?;
        y[pos] = w.iter().zip(&x[..window]).map(|(c, v)| c * v).sum();
        let tail = &x[n - window..];
        let w_end = savgol_coefficients(window, polyorder, window - 1 - pos)?;
        y[n - 1 - pos] = w_end.iter().zip(tail).map(|(c, v)| c * v).sum();
    }
    Ok(y)
}

pub fn savitzky_golay(series: &CleanSeries, window: usize, polyorder: usize) -> Result<CleanSeries> {
    Ok(series.with_values(savgol_apply(&series.v, window, polyorder)?))
}
