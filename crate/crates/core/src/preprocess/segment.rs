use std::collections::BTreeMap;

use crate::model::{GazeSample, Phase, ScreenGeometry, SessionManifest, Timestamped};

#[derive(Debug, Clone, PartialEq)]
pub struct Segmented<T> {
    pub phases: BTreeMap<Phase, Vec<T>>,
    pub warnings: Vec<String>,
}

impl<T> Segmented<T> {
    pub fn get(&self, phase: Phase) -> &[T] {
        self.phases.get(&phase).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Splits samples into the manifest's half-open phase spans; samples outside
/// every span are dropped.
pub fn segment_by_phase<T: Timestamped + Clone>(
    samples: &[T],
    manifest: &SessionManifest,
) -> Segmented<T> {
    let mut phases: BTreeMap<Phase, Vec<T>> = Phase::ALL.iter().map(|&p| (p, Vec::new())).collect();
    for s in samples {
        let t = s.time();
        if let Some(span) = manifest.phases.iter().find(|span| span.contains(t)) {
            phases.get_mut(&span.phase).expect("all phases present").push(s.clone());
        }
    }
    let warnings = phases
        .iter()
        .filter(|(_, v)| v.is_empty())
        .map(|(p, _)| format!("{}: phase {p} has no samples", manifest.participant_id))
        .collect();
    Segmented { phases, warnings }
}

/// Keeps samples whose gaze point lies on the display (`0 <= x < width`,
/// `0 <= y < height`). Samples without a valid position are dropped too.
pub fn drop_offscreen(samples: &[GazeSample], geometry: &ScreenGeometry) -> Vec<GazeSample> {
    samples
        .iter()
        .filter(|s| s.position().is_some_and(|(x, y)| geometry.contains(x, y)))
        .copied()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BvpSample, Label, PhaseSpan};

    fn manifest(spans: [(f64, f64); 3]) -> SessionManifest {
        SessionManifest {
            participant_id: "p".into(),
            label: Label::Win,
            geometry: ScreenGeometry {
                width_px: 1920.0,
                height_px: 1080.0,
                diagonal_mm: 604.52,
                viewing_distance_mm: 600.0,
            },
            aois: vec![],
            phases: Phase::ALL
                .iter()
                .zip(spans)
                .map(|(&phase, (t_start, t_end))| PhaseSpan { phase, t_start, t_end })
                .collect(),
            gaze_path: "g.csv".into(),
            bvp_path: "b.csv".into(),
        }
    }

    fn bvp(ts: impl IntoIterator<Item = f64>) -> Vec<BvpSample> {
        ts.into_iter().map(|t| BvpSample { t, value: t }).collect()
    }

    #[test]
    fn half_open_membership() {
        let m = manifest([(0.0, 3.0), (3.0, 7.0), (7.0, 10.0)]);
        let seg = segment_by_phase(&bvp((1..=10).map(f64::from)), &m);
        let low: Vec<f64> = seg.get(Phase::Low).iter().map(|s| s.t).collect();
        assert_eq!(low, vec![3.0, 4.0, 5.0, 6.0]);
        // t = 10 sits on the last span's end and is dropped
        assert_eq!(seg.get(Phase::High).len(), 3);
        assert!(seg.warnings.is_empty());
    }

    #[test]
    fn empty_span_warns() {
        let m = manifest([(0.0, 1.0), (20.0, 30.0), (30.0, 40.0)]);
        let seg = segment_by_phase(&bvp([0.5, 35.0]), &m);
        assert!(seg.get(Phase::Low).is_empty());
        assert_eq!(seg.warnings.len(), 1);
        assert!(seg.warnings[0].contains("low"));
    }

    #[test]
    fn partitions_without_duplicates() {
        let m = manifest([(0.0, 2.5), (2.5, 5.0), (5.5, 9.0)]);
        let samples = bvp((0..100).map(|i| i as f64 * 0.1));
        let seg = segment_by_phase(&samples, &m);
        let total: usize = Phase::ALL.iter().map(|&p| seg.get(p).len()).sum();
        let inside = samples.iter().filter(|s| m.phases.iter().any(|p| p.contains(s.t))).count();
        assert_eq!(total, inside);
    }

    fn g(x: f64, y: f64) -> GazeSample {
        GazeSample { t: 0.0, x: Some(x), y: Some(y), pupil_left: None, pupil_right: None, valid: true }
    }

    #[test]
    fn offscreen_rules() {
        let geom = manifest([(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)]).geometry;
        assert!(drop_offscreen(&[g(-5.0, 10.0)], &geom).is_empty());
        assert_eq!(drop_offscreen(&[g(1919.5, 1079.0)], &geom).len(), 1);
        assert!(drop_offscreen(&[g(1920.0, 10.0)], &geom).is_empty());
        let all = vec![g(1.0, 1.0), g(500.0, 500.0), g(0.0, 0.0)];
        assert_eq!(drop_offscreen(&all, &geom), all);
    }
}
