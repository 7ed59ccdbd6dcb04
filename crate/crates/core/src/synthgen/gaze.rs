use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::model::{AoiRect, GazeSample, ScreenGeometry};
use crate::ocular::angular_distance_deg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    HandCards,
    PotionBar,
    Elsewhere,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::HandCards, Region::PotionBar, Region::Elsewhere];

    fn index(self) -> usize {
        match self {
            Region::HandCards => 0,
            Region::PotionBar => 1,
            Region::Elsewhere => 2,
        }
    }

    pub fn aoi_name(self) -> Option<&'static str> {
        match self {
            Region::HandCards => Some("hand_cards"),
            Region::PotionBar => Some("potion_bar"),
            Region::Elsewhere => None,
        }
    }

    /// Unit vector from the screen centre (y grows downwards).
    fn direction(self) -> (f64, f64) {
        let (s, c) = (3f64.sqrt() / 2.0, 0.5);
        match self {
            Region::HandCards => (0.0, 1.0),
            Region::PotionBar => (-s, -c),
            Region::Elsewhere => (s, -c),
        }
    }
}

/// Three fixation regions on the vertices of an equilateral triangle around
/// the screen centre. Consecutive fixations always change region, so every
/// saccade spans one triangle side whatever the dwell shares are.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layout {
    pub centre: (f64, f64),
    pub radius_px: f64,
    pub side_min_px: f64,
    pub side_max_px: f64,
}

const MARGIN_PX: f64 = 2.0;

impl Layout {
    pub fn new(geometry: &ScreenGeometry, radius_px: f64) -> Self {
        let centre = (geometry.width_px / 2.0, geometry.height_px / 2.0);
        let r_max = (geometry.height_px / 2.0 - radius_px - 10.0).max(0.0);
        Layout {
            centre,
            radius_px,
            side_min_px: 2.0 * radius_px + 40.0,
            side_max_px: r_max * 3f64.sqrt(),
        }
    }

    pub fn default_aois() -> Vec<AoiRect> {
        let spec = super::SynthSpec::default();
        Layout::new(&spec.geometry, spec.gaze.fixation_radius_px).aois()
    }

    pub fn clamp_side(&self, side: f64) -> f64 {
        side.clamp(self.side_min_px, self.side_max_px)
    }

    pub fn vertex(&self, region: Region, side: f64) -> (f64, f64) {
        let r = side / 3f64.sqrt();
        let (ux, uy) = region.direction();
        (self.centre.0 + r * ux, self.centre.1 + r * uy)
    }

    /// AOI rectangles covering every fixation disc the side range allows.
    pub fn aois(&self) -> Vec<AoiRect> {
        Region::ALL
            .iter()
            .filter_map(|&region| {
                let name = region.aoi_name()?;
                let a = self.vertex(region, self.side_min_px);
                let b = self.vertex(region, self.side_max_px);
                let pad = self.radius_px + MARGIN_PX;
                Some(AoiRect {
                    name: name.to_string(),
                    x0: a.0.min(b.0) - pad,
                    y0: a.1.min(b.1) - pad,
                    x1: a.0.max(b.0) + pad,
                    y1: a.1.max(b.1) + pad,
                })
            })
            .collect()
    }
}

/// Dwell shares `[hand_cards, potion_bar, elsewhere]`, each kept at or below
/// 0.49 so that a chain without self-transitions can realise them.
pub(crate) fn dwell_vector(hand: f64, potion: f64) -> [f64; 3] {
    const CAP: f64 = 0.49;
    let mut h = hand.clamp(0.0, CAP);
    let mut p = potion.clamp(0.0, CAP);
    let e = 1.0 - h - p;
    if e > CAP {
        let deficit = e - CAP;
        let add_h = (deficit / 2.0).min(CAP - h);
        h += add_h;
        p = (p + deficit - add_h).min(CAP);
    }
    [h, p, 1.0 - h - p]
}

/// Reversible transition matrix with zero diagonal and stationary law `q`.
fn transitions(q: [f64; 3]) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            if i == j {
                continue;
            }
            let k = 3 - i - j;
            let flow = ((q[i] + q[j] - q[k]) / 2.0).max(0.0);
            m[i][j] = if q[i] > 0.0 { flow / q[i] } else { q[j] / (1.0 - q[i]) };
        }
        let total: f64 = m[i].iter().sum();
        if total > 0.0 {
            for v in &mut m[i] {
                *v /= total;
            }
        } else {
            for (j, v) in m[i].iter_mut().enumerate() {
                *v = if j == i { 0.0 } else { 0.5 };
            }
        }
    }
    m
}

fn pick(weights: &[f64; 3], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen::<f64>() * weights.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Gaze behaviour in force when a fixation starts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeState {
    pub fixation_duration_s: f64,
    pub fixation_duration_cv: f64,
    pub side_px: f64,
    pub dwell: [f64; 3],
    pub transition_s: f64,
    pub blink_rate_hz: f64,
    pub blink_duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedFixation {
    pub t_start: f64,
    pub t_end: f64,
    pub x: f64,
    pub y: f64,
    pub region: Region,
}

/// A planted saccade: gaze leaves `from` at `t_onset` and reaches `to` on
/// the sample at `t_end - 1/rate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedSaccade {
    pub t_onset: f64,
    pub t_end: f64,
    pub from: (f64, f64),
    pub to: (f64, f64),
    pub amplitude_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GazePlan {
    pub fixations: Vec<PlannedFixation>,
    pub saccades: Vec<PlannedSaccade>,
    /// Sample index ranges `[start, end)`.
    #[serde(skip)]
    pub(crate) fixation_samples: Vec<(usize, usize)>,
    pub blinks: Vec<(f64, f64)>,
    #[serde(skip)]
    pub(crate) blink_samples: Vec<(usize, usize)>,
}

fn disc_point(centre: (f64, f64), radius: f64, rng: &mut impl Rng) -> (f64, f64) {
    let r = radius * rng.gen::<f64>().sqrt();
    let a = rng.gen::<f64>() * std::f64::consts::TAU;
    (centre.0 + r * a.cos(), centre.1 + r * a.sin())
}

/// Fixation and saccade schedule for `n_samples` grid samples at
/// `rate_hz`. Boundaries fall on grid samples.
pub fn plan_gaze(
    layout: &Layout,
    geometry: &ScreenGeometry,
    n_samples: usize,
    rate_hz: f64,
    state_at: impl Fn(f64) -> GazeState,
    rng: &mut impl Rng,
) -> GazePlan {
    let pitch = geometry.pixel_pitch().unwrap_or(1.0);
    let mut plan = GazePlan::default();
    let first = state_at(0.0);
    let mut region = Region::ALL[pick(&first.dwell, rng)];
    let mut pos = disc_point(layout.vertex(region, layout.clamp_side(first.side_px)), layout.radius_px, rng);
    let mut k = 0usize;
    let t = |i: usize| i as f64 / rate_hz;
    while k < n_samples {
        let st = state_at(t(k));
        let jitter = Normal::new(0.0, st.fixation_duration_cv).expect("cv validated");
        let dur = (st.fixation_duration_s * (1.0 + jitter.sample(rng)))
            .clamp(0.1, 3.0 * st.fixation_duration_s);
        let nf = ((dur * rate_hz).round() as usize).max(1);
        let end = (k + nf).min(n_samples);
        plan.fixations.push(PlannedFixation { t_start: t(k), t_end: t(end), x: pos.0, y: pos.1, region });
        plan.fixation_samples.push((k, end));
        let cycle = nf as f64 / rate_hz + st.transition_s;
        let nb = (st.blink_duration_s * rate_hz).round() as usize;
        if nf >= nb + (0.1 * rate_hz) as usize && rng.gen::<f64>() < (st.blink_rate_hz * cycle).min(1.0) {
            let bs = k + (nf - nb) / 2;
            if bs + nb <= n_samples {
                plan.blinks.push((t(bs), t(bs + nb)));
                plan.blink_samples.push((bs, bs + nb));
            }
        }
        k = end;
        if k >= n_samples {
            break;
        }
        let next = Region::ALL[pick(&transitions(st.dwell)[region.index()], rng)];
        let target = disc_point(layout.vertex(next, layout.clamp_side(st.side_px)), layout.radius_px, rng);
        let nt = ((st.transition_s * rate_hz).round() as usize).max(1);
        let amplitude_deg =
            angular_distance_deg(target.0 - pos.0, target.1 - pos.1, pitch, geometry.viewing_distance_mm);
        plan.saccades.push(PlannedSaccade {
            t_onset: t(k),
            t_end: t((k + nt).min(n_samples)),
            from: pos,
            to: target,
            amplitude_deg,
        });
        k += nt;
        pos = target;
        region = next;
    }
    plan
}

/// Samples the plan on the grid: constant fixations, linear transitions,
/// invalid samples during blinks. `pupil(t)` gives left and right diameters.
pub fn render_gaze(
    plan: &GazePlan,
    n_samples: usize,
    rate_hz: f64,
    noise_px: f64,
    pupil: impl Fn(f64, &mut dyn rand::RngCore) -> (f64, f64),
    rng: &mut dyn rand::RngCore,
) -> Vec<GazeSample> {
    let mut xs = vec![0.0; n_samples];
    let mut ys = vec![0.0; n_samples];
    for (f, &(a, b)) in plan.fixations.iter().zip(&plan.fixation_samples) {
        xs[a..b].fill(f.x);
        ys[a..b].fill(f.y);
    }
    for s in &plan.saccades {
        let a = (s.t_onset * rate_hz).round() as usize;
        let b = ((s.t_end * rate_hz).round() as usize).min(n_samples);
        let nt = (b - a).max(1) as f64;
        for (j, i) in (a..b).enumerate() {
            let w = (j + 1) as f64 / nt;
            xs[i] = s.from.0 + w * (s.to.0 - s.from.0);
            ys[i] = s.from.1 + w * (s.to.1 - s.from.1);
        }
    }
    let mut blinking = vec![false; n_samples];
    for &(a, b) in &plan.blink_samples {
        blinking[a..b.min(n_samples)].fill(true);
    }
    let noise = Normal::new(0.0, noise_px.max(0.0)).expect("noise validated");
    (0..n_samples)
        .map(|i| {
            let t = i as f64 / rate_hz;
            if blinking[i] {
                return GazeSample { t, x: None, y: None, pupil_left: None, pupil_right: None, valid: false };
            }
            let (l, r) = pupil(t, rng);
            let (nx, ny) = if noise_px > 0.0 { (noise.sample(rng), noise.sample(rng)) } else { (0.0, 0.0) };
            GazeSample {
                t,
                x: Some(xs[i] + nx),
                y: Some(ys[i] + ny),
                pupil_left: Some(l),
                pupil_right: Some(r),
                valid: true,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn geometry() -> ScreenGeometry {
        super::super::SynthSpec::default().geometry
    }

    fn state(dwell: [f64; 3]) -> GazeState {
        GazeState {
            fixation_duration_s: 0.25,
            fixation_duration_cv: 0.2,
            side_px: 420.0,
            dwell,
            transition_s: 0.04,
            blink_rate_hz: 0.0,
            blink_duration_s: 0.1,
        }
    }

    #[test]
    fn aois_are_disjoint_and_hold_their_discs() {
        let layout = Layout::new(&geometry(), 45.0);
        let aois = layout.aois();
        assert_eq!(aois.len(), 2);
        let (a, b) = (&aois[0], &aois[1]);
        assert!(a.x1 <= b.x0 || b.x1 <= a.x0 || a.y1 <= b.y0 || b.y1 <= a.y0);
        for side in [layout.side_min_px, 400.0, layout.side_max_px] {
            for (region, aoi) in [(Region::HandCards, a), (Region::PotionBar, b)] {
                let (cx, cy) = layout.vertex(region, side);
                assert!(aoi.contains(cx - 45.0, cy - 45.0) && aoi.contains(cx + 45.0, cy + 45.0));
            }
            let (ex, ey) = layout.vertex(Region::Elsewhere, side);
            for aoi in &aois {
                for (dx, dy) in [(-45.0, -45.0), (-45.0, 45.0), (45.0, -45.0), (45.0, 45.0)] {
                    assert!(!aoi.contains(ex + dx, ey + dy));
                }
            }
            assert!(geometry().contains(ex + 45.0, ey - 45.0));
        }
    }

    #[test]
    fn chain_realises_dwell_shares() {
        for q in [[0.3, 0.3, 0.4], [0.45, 0.45, 0.1], [0.2, 0.35, 0.45]] {
            let m = transitions(q);
            for i in 0..3 {
                assert_eq!(m[i][i], 0.0);
                assert!((m[i].iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let inflow: f64 = (0..3).map(|j| q[j] * m[j][i]).sum();
                assert!((inflow - q[i]).abs() < 1e-12, "{q:?}");
            }
        }
    }

    #[test]
    fn dwell_vector_respects_caps() {
        assert_eq!(dwell_vector(0.3, 0.3), [0.3, 0.3, 1.0 - 0.3 - 0.3]);
        let v = dwell_vector(0.1, 0.1);
        assert!((v[2] - 0.49).abs() < 1e-12 && (v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let v = dwell_vector(0.7, 0.0);
        assert!(v.iter().all(|&x| x <= 0.49 + 1e-12));
    }

    #[test]
    fn saccade_amplitudes_do_not_depend_on_dwell() {
        let layout = Layout::new(&geometry(), 45.0);
        let mean_amp = |dwell: [f64; 3]| {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let plan = plan_gaze(&layout, &geometry(), 250 * 600, 250.0, |_| state(dwell), &mut rng);
            plan.saccades.iter().map(|s| s.amplitude_deg).sum::<f64>() / plan.saccades.len() as f64
        };
        let (a, b) = (mean_amp([0.45, 0.45, 0.1]), mean_amp([0.1, 0.4, 0.49]));
        assert!((a - b).abs() < 0.05 * a, "{a} vs {b}");
    }

    #[test]
    fn realised_dwell_tracks_target() {
        let layout = Layout::new(&geometry(), 45.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = [0.45, 0.2, 0.35];
        let plan = plan_gaze(&layout, &geometry(), 250 * 1200, 250.0, |_| state(q), &mut rng);
        let n = plan.fixations.len() as f64;
        for r in Region::ALL {
            let share = plan.fixations.iter().filter(|f| f.region == r).count() as f64 / n;
            assert!((share - q[r.index()]).abs() < 0.03, "{r:?}: {share}");
        }
        assert!(plan.fixations.windows(2).all(|w| w[0].region != w[1].region));
    }
}
