use std::f64::consts::PI;

use super::{check_rate, CleanSeries};
use crate::error::{Error, Result};

/// One second-order section, `a0` normalised to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    /// Transposed direct-form II state for a steady unit input.
    fn unit_state(&self) -> [f64; 2] {
        let z2 = self.b[2] - self.a[1];
        let z1 = self.b[1] - self.a[0] + z2;
        [z1, z2]
    }

    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        for s in x.iter_mut() {
            let input = *s;
            let y = b0 * input + z[0];
            z[0] = b1 * input - a1 * y + z[1];
            z[1] = b2 * input - a2 * y;
            *s = y;
        }
    }
}

/// Digital Butterworth low-pass (bilinear transform with pre-warping) as a
/// cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Butterworth {
    order: usize,
    cutoff_hz: f64,
    rate_hz: f64,
    sections: Vec<Biquad>,
}

impl Butterworth {
    pub fn lowpass(order: usize, cutoff_hz: f64, rate_hz: f64) -> Result<Self> {
        check_rate(rate_hz)?;
        if order == 0 || !order.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "Butterworth order must be a positive even number, got {order}"
            )));
        }
        let nyquist = rate_hz / 2.0;
        if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
            return Err(Error::invalid(format!(
                "cutoff {cutoff_hz} Hz must lie in (0, {nyquist}) Hz"
            )));
        }
        let k = (PI * cutoff_hz / rate_hz).tan();
        let k2 = k * k;
        let sections = (1..=order / 2)
            .map(|m| {
                let damping = 2.0 * ((2 * m - 1) as f64 * PI / (2 * order) as f64).sin();
                let norm = 1.0 / (1.0 + damping * k + k2);
                let b0 = k2 * norm;
                Biquad {
                    b: [b0, 2.0 * b0, b0],
                    a: [2.0 * (k2 - 1.0) * norm, (1.0 - damping * k + k2) * norm],
                }
            })
            .collect();
        Ok(Self {
            order,
            cutoff_hz,
            rate_hz,
            sections,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Edge padding used by [`Butterworth::filtfilt`].
    pub fn pad_len(&self) -> usize {
        3 * (self.order + 1)
    }

    /// Analytic magnitude response at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        let ratio = (PI * freq_hz / self.rate_hz).tan() / (PI * self.cutoff_hz / self.rate_hz).tan();
        1.0 / (1.0 + ratio.powi(2 * self.order as i32)).sqrt()
    }

    /// Causal pass, initialised to the steady state of the first sample.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.filter_in_place(&mut y);
        y
    }

    fn filter_in_place(&self, y: &mut [f64]) {
        let Some(&x0) = y.first() else { return };
        for s in &self.sections {
            let [z1, z2] = s.unit_state();
            s.run(y, [z1 * x0, z2 * x0]);
        }
    }

    /// Forward-backward pass with odd reflection padding of `pad_len` samples.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>> {
        let pad = self.pad_len();
        let n = x.len();
        if n <= pad {
            return Err(Error::data(format!(
                "zero-phase filtering needs more than {pad} samples, got {n}"
            )));
        }
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        self.filter_in_place(&mut ext);
        ext.reverse();
        self.filter_in_place(&mut ext);
        ext.reverse();
        Ok(ext[pad..pad + n].to_vec())
    }
}

/// Low-pass filters a clean series; `zero_phase` selects forward-backward filtering.
pub fn butterworth_lowpass(
    series: &CleanSeries,
    order: usize,
    cutoff_hz: f64,
    zero_phase: bool,
) -> Result<CleanSeries> {
    let filter = Butterworth::lowpass(order, cutoff_hz, series.rate_hz)?;
    let v = if zero_phase {
        filter.filtfilt(&series.v)?
    } else {
        if series.len() <= filter.pad_len() {
            return Err(Error::data(format!(
                "series of {} samples is shorter than the {}-sample filter padding",
                series.len(),
                filter.pad_len()
            )));
        }
        filter.filter(&series.v)
    };
    Ok(series.with_values(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sine(freq: f64, rate: f64, n: usize, phase: f64) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / rate + phase).sin())
            .collect()
    }

    #[test]
    fn dc_gain_is_one() {
        for (order, cutoff, rate) in [(4, 4.0, 250.0), (6, 3.0, 64.0), (2, 10.0, 100.0), (8, 1.0, 250.0)] {
            let f = Butterworth::lowpass(order, cutoff, rate).unwrap();
            let x = vec![3.7; 500];
            for y in [f.filter(&x), f.filtfilt(&x).unwrap()] {
                assert!(y.iter().all(|v| (v - 3.7).abs() < 1e-6), "order {order}");
            }
        }
    }

    #[test]
    fn analytic_half_power_at_cutoff() {
        let f = Butterworth::lowpass(6, 3.0, 64.0).unwrap();
        assert!((f.magnitude(3.0) - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn sine_at_cutoff_is_attenuated_3db() {
        let (rate, cutoff) = (250.0, 4.0);
        let f = Butterworth::lowpass(4, cutoff, rate).unwrap();
        let y = f.filter(&sine(cutoff, rate, 20_000, 0.0));
        let peak = y[5000..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - 0.5f64.sqrt()).abs() < 0.02 * 0.5f64.sqrt(), "peak {peak}");
    }

    #[test]
    fn zero_phase_has_no_lag() {
        let (rate, cutoff) = (64.0, 3.0);
        let f = Butterworth::lowpass(6, cutoff, rate).unwrap();
        let x = sine(0.5 * cutoff, rate, 2000, 0.3);
        let y = f.filtfilt(&x).unwrap();
        let (core_x, core_y) = (&x[200..1800], &y[200..1800]);
        let lag = (-10i32..=10)
            .max_by(|&a, &b| {
                let xc = |l: i32| -> f64 {
                    (20..core_x.len() - 20)
                        .map(|i| core_x[i] * core_y[(i as i32 + l) as usize])
                        .sum()
                };
                xc(a).total_cmp(&xc(b))
            })
            .unwrap();
        assert_eq!(lag, 0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Butterworth::lowpass(4, 32.0, 64.0).is_err());
        assert!(Butterworth::lowpass(3, 4.0, 64.0).is_err());
        let f = Butterworth::lowpass(6, 3.0, 64.0).unwrap();
        assert!(f.filtfilt(&[1.0; 21]).is_err());
    }

    proptest! {
        #[test]
        fn single_pass_is_linear(
            u in proptest::collection::vec(-10.0f64..10.0, 64),
            w in proptest::collection::vec(-10.0f64..10.0, 64),
            a in -3.0f64..3.0, b in -3.0f64..3.0,
        ) {
            let f = Butterworth::lowpass(4, 4.0, 250.0).unwrap();
            let mix: Vec<f64> = u.iter().zip(&w).map(|(x, y)| a * x + b * y).collect();
            let lhs = f.filter(&mix);
            let (fu, fw) = (f.filter(&u), f.filter(&w));
            for i in 0..mix.len() {
                prop_assert!((lhs[i] - (a * fu[i] + b * fw[i])).abs() < 1e-9);
            }
        }

        #[test]
        fn zero_phase_commutes_with_reversal(x in proptest::collection::vec(-5.0f64..5.0, 1200)) {
            let f = Butterworth::lowpass(6, 3.0, 64.0).unwrap();
            let y = f.filtfilt(&x).unwrap();
            let mut xr = x.clone();
            xr.reverse();
            let mut yr = f.filtfilt(&xr).unwrap();
            yr.reverse();
            for i in 500..700 {
                prop_assert!((y[i] - yr[i]).abs() < 1e-9, "i={} {} vs {}", i, y[i], yr[i]);
            }
        }
    }
}
