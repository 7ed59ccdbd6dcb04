use crate::error::{Error, Result};
use crate::model::ScreenGeometry;
use crate::preprocess::{savgol_apply, CleanSeries, SgConfig};

/// Visual angle in degrees subtended by an on-screen displacement.
pub fn angular_distance_deg(dx_px: f64, dy_px: f64, pitch_mm: f64, distance_mm: f64) -> f64 {
    let d_mm = pitch_mm * dx_px.hypot(dy_px);
    2.0 * (d_mm / (2.0 * distance_mm)).atan().to_degrees()
}

/// Angular gaze speed (deg/s) per grid sample, Savitzky-Golay smoothed.
///
/// Sample `i` carries the speed of the step `i-1 -> i`; sample 0 repeats
/// sample 1. Series shorter than the smoothing window are returned unsmoothed.
pub fn point_velocity(
    x: &CleanSeries,
    y: &CleanSeries,
    geometry: &ScreenGeometry,
    sg: &SgConfig,
) -> Result<CleanSeries> {
    let pitch = geometry.pixel_pitch()?;
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::data(format!(
            "velocity needs two aligned series of at least 2 samples (got {} and {})",
            n,
            y.len()
        )));
    }
    let dt = x.dt();
    let mut v = vec![0.0; n];
    for i in 1..n {
        let theta = angular_distance_deg(
            x.v[i] - x.v[i - 1],
            y.v[i] - y.v[i - 1],
            pitch,
            geometry.viewing_distance_mm,
        );
        v[i] = theta / dt;
    }
    v[0] = v[1];
    let v = if n >= sg.window {
        savgol_apply(&v, sg.window, sg.polyorder)?
    } else {
        v
    };
    let mut out = x.with_values(v);
    // a step touching an unobserved sample has no measurable speed
    for i in 0..n {
        out.unfilled[i] = x.unfilled[i] || y.unfilled[i];
        out.gap_mask[i] = x.gap_mask[i] || y.gap_mask[i];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometry(distance: f64) -> ScreenGeometry {
        ScreenGeometry {
            width_px: 1920.0,
            height_px: 1080.0,
            diagonal_mm: 604.52,
            viewing_distance_mm: distance,
        }
    }

    fn ramp(step: f64, n: usize) -> CleanSeries {
        CleanSeries::from_uniform(0.0, 250.0, (0..n).map(|i| 100.0 + step * i as f64).collect())
    }

    #[test]
    fn stationary_gaze_has_zero_speed() {
        let x = ramp(0.0, 100);
        let v = point_velocity(&x, &x, &geometry(600.0), &SgConfig::default()).unwrap();
        assert!(v.v.iter().all(|s| s.abs() < 1e-12));
    }

    #[test]
    fn hundred_pixel_steps() {
        let pitch = 0.2744;
        let theta = 2.0 * (100.0 * pitch / 1200.0f64).atan().to_degrees();
        assert!((theta - 2.620).abs() < 0.01);

        let geom = ScreenGeometry { diagonal_mm: pitch * 1920f64.hypot(1080.0), ..geometry(600.0) };
        let x = ramp(100.0, 60);
        let y = ramp(0.0, 60);
        let v = point_velocity(&x, &y, &geom, &SgConfig::default()).unwrap();
        for s in &v.v {
            assert!((s - theta / 0.004).abs() < 1e-6);
            assert!((s - 655.0).abs() < 3.0);
        }
    }

    #[test]
    fn doubling_distance_halves_small_angles() {
        let near = angular_distance_deg(10.0, 0.0, 0.2744, 600.0);
        let far = angular_distance_deg(10.0, 0.0, 0.2744, 1200.0);
        assert!((near / far - 2.0).abs() < 0.02);
    }

    #[test]
    fn angle_is_monotone_in_distance() {
        let mut last = -1.0;
        for d in (0..2000).map(|i| i as f64) {
            let a = angular_distance_deg(d, 0.0, 0.2744, 600.0);
            assert!(a > last);
            last = a;
        }
    }
}
