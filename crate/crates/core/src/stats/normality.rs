use std::f64::consts::PI;

use statrs::distribution::{ContinuousCDF, Normal};

use super::{TestMethod, TestResult};
use crate::error::{Error, Result};

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Royston's approximation to the Shapiro-Wilk coefficients for the upper
/// half of the order statistics, largest first.
fn sw_coefficients(n: usize) -> Vec<f64> {
    let half = n / 2;
    if n == 3 {
        return vec![0.5f64.sqrt()];
    }
    const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056];
    const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
    let norm = std_normal();
    let an25 = n as f64 + 0.25;
    let m: Vec<f64> = (1..=half)
        .map(|i| norm.inverse_cdf((i as f64 - 0.375) / an25))
        .collect();
    let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / (n as f64).sqrt();
    let a1 = poly(&C1, rsn) - m[0] / ssumm2;
    let mut a = vec![0.0; half];
    a[0] = a1;
    let (first, fac) = if n > 5 {
        let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
        a[1] = a2;
        let fac = ((summ2 - 2.0 * m[0].powi(2) - 2.0 * m[1].powi(2))
            / (1.0 - 2.0 * a1.powi(2) - 2.0 * a2.powi(2)))
        .sqrt();
        (2, fac)
    } else {
        (1, ((summ2 - 2.0 * m[0].powi(2)) / (1.0 - 2.0 * a1.powi(2))).sqrt())
    };
    for i in first..half {
        a[i] = -m[i] / fac;
    }
    a
}

fn sw_pvalue(w: f64, n: usize) -> f64 {
    if w >= 1.0 {
        return 1.0;
    }
    if n == 3 {
        return (6.0 / PI * (w.sqrt().asin() - (0.75f64).sqrt().asin())).clamp(0.0, 1.0);
    }
    let nf = n as f64;
    let w1 = (1.0 - w).ln();
    let (y, m, s) = if n <= 11 {
        let gamma = poly(&[-2.273, 0.459], nf);
        if w1 >= gamma {
            return 0.0;
        }
        let y = -(gamma - w1).ln();
        let m = poly(&[0.544, -0.39978, 0.025054, -6.714e-4], nf);
        let s = poly(&[1.3822, -0.77857, 0.062767, -0.0020322], nf).exp();
        (y, m, s)
    } else {
        let ln = nf.ln();
        let m = poly(&[-1.5861, -0.31082, -0.083751, 0.0038915], ln);
        let s = poly(&[-0.4803, -0.082676, 0.0030302], ln).exp();
        (w1, m, s)
    };
    (1.0 - std_normal().cdf((y - m) / s)).clamp(0.0, 1.0)
}

/// Shapiro-Wilk normality test (Royston 1995) for 3 <= n <= 5000.
pub fn shapiro_wilk(sample: &[f64]) -> Result<TestResult> {
    let n = sample.len();
    if !(3..=5000).contains(&n) {
        return Err(Error::invalid(format!("Shapiro-Wilk needs 3..=5000 values, got {n}")));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("Shapiro-Wilk sample contains non-finite values"));
    }
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let mean = x.iter().sum::<f64>() / n as f64;
    let ssq: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    if !(ssq > 1e-24 * (1.0 + mean * mean) * n as f64) {
        return Err(Error::invalid("Shapiro-Wilk sample has zero variance"));
    }
    let a = sw_coefficients(n);
    let b: f64 = a.iter().enumerate().map(|(i, ai)| ai * (x[n - 1 - i] - x[i])).sum();
    let w = (b * b / ssq).min(1.0);
    Ok(TestResult {
        statistic: w,
        p_value: sw_pvalue(w, n),
        method: TestMethod::ShapiroWilk,
        n1: n,
        n2: 0,
        df: None,
    })
}

/// Normal quantile-quantile pairs `(theoretical, observed)` using Blom
/// plotting positions.
pub fn qq_points(sample: &[f64]) -> Vec<(f64, f64)> {
    let mut x: Vec<f64> = sample.iter().copied().filter(|v| v.is_finite()).collect();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let norm = std_normal();
    x.iter()
        .enumerate()
        .map(|(i, &v)| (norm.inverse_cdf((i as f64 + 1.0 - 0.375) / (n + 0.25)), v))
        .collect()
}
