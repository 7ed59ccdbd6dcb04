use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::velocity::angular_distance_deg;
use crate::error::{Error, Result};
use crate::model::ScreenGeometry;
use crate::preprocess::CleanSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Fixation,
    Saccade,
}

impl EventKind {
    fn flip(self) -> Self {
        match self {
            EventKind::Fixation => EventKind::Saccade,
            EventKind::Saccade => EventKind::Fixation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcularEvent {
    pub kind: EventKind,
    pub t_start: f64,
    pub t_end: f64,
    pub duration: f64,
    /// Grid samples `[start_index, end_index)` covered by the event.
    pub start_index: usize,
    pub end_index: usize,
    pub amplitude_deg: Option<f64>,
    pub peak_velocity_dps: Option<f64>,
    pub mean_velocity_dps: Option<f64>,
    pub centroid_x: Option<f64>,
    pub centroid_y: Option<f64>,
}

/// I-VT parameters (`ocular.*` config keys).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub vel_threshold_dps: f64,
    pub min_fixation_s: f64,
    pub min_saccade_s: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            vel_threshold_dps: 30.0,
            min_fixation_s: 0.060,
            min_saccade_s: 0.010,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.vel_threshold_dps > 0.0) || self.min_fixation_s < 0.0 || self.min_saccade_s < 0.0 {
            return Err(Error::invalid(
                "detector threshold must be positive and minimum durations non-negative",
            ));
        }
        Ok(())
    }

    fn min_len(&self, kind: EventKind) -> f64 {
        match kind {
            EventKind::Fixation => self.min_fixation_s,
            EventKind::Saccade => self.min_saccade_s,
        }
    }
}

#[derive(Debug, Clone)]
struct Run {
    kind: EventKind,
    start: usize,
    end: usize,
    prev: Option<usize>,
    next: Option<usize>,
    alive: bool,
}

/// Splits `above` into runs and repeatedly flips the shortest run that is
/// below its minimum duration, absorbing it into its neighbours.
fn label_runs(above: &[bool], dt: f64, cfg: &DetectorConfig) -> Vec<(EventKind, usize, usize)> {
    let kind_of = |b: bool| if b { EventKind::Saccade } else { EventKind::Fixation };
    let mut runs: Vec<Run> = Vec::new();
    let mut start = 0;
    for i in 1..=above.len() {
        if i == above.len() || above[i] != above[start] {
            let idx = runs.len();
            runs.push(Run {
                kind: kind_of(above[start]),
                start,
                end: i,
                prev: idx.checked_sub(1),
                next: None,
                alive: true,
            });
            if idx > 0 {
                runs[idx - 1].next = Some(idx);
            }
            start = i;
        }
    }

    let short = |r: &Run| ((r.end - r.start) as f64) * dt < cfg.min_len(r.kind) - 1e-9;
    let mut heap: BinaryHeap<Reverse<(usize, usize, usize)>> = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| short(r))
        .map(|(i, r)| Reverse((r.end - r.start, r.start, i)))
        .collect();

    while let Some(Reverse((len, _, i))) = heap.pop() {
        let r = &runs[i];
        if !r.alive || r.end - r.start != len || !short(r) {
            continue;
        }
        if r.prev.is_none() && r.next.is_none() {
            // a lone run has nothing to merge into
            continue;
        }
        let (prev, next) = (r.prev, r.next);
        let kind = r.kind.flip();
        // the survivor is the left neighbour if any, else this run
        let keep = prev.unwrap_or(i);
        let mut end = runs[i].end;
        let mut after = next;
        if let Some(n) = next {
            end = runs[n].end;
            after = runs[n].next;
            runs[n].alive = false;
        }
        if keep != i {
            runs[i].alive = false;
        }
        let k = &mut runs[keep];
        k.kind = kind;
        k.end = end;
        k.next = after;
        if let Some(a) = after {
            runs[a].prev = Some(keep);
        }
        let k = &runs[keep];
        if short(k) {
            heap.push(Reverse((k.end - k.start, k.start, keep)));
        }
    }

    let mut out = Vec::new();
    let mut cur = runs.first().map(|_| 0);
    while let Some(i) = cur {
        let r = &runs[i];
        out.push((r.kind, r.start, r.end));
        cur = r.next;
    }
    out
}

/// Velocity-threshold identification of fixations and saccades.
///
/// Every grid sample belongs to exactly one event; consecutive events
/// alternate in kind. A saccade's amplitude is measured from the last sample
/// before it to its final sample.
pub fn detect_events(
    velocity: &CleanSeries,
    x: &CleanSeries,
    y: &CleanSeries,
    geometry: &ScreenGeometry,
    cfg: &DetectorConfig,
) -> Result<Vec<OcularEvent>> {
    cfg.validate()?;
    let n = velocity.len();
    if n == 0 {
        return Err(Error::data("event detection on an empty series"));
    }
    if x.len() != n || y.len() != n {
        return Err(Error::data("velocity and gaze series are not aligned"));
    }
    let pitch = geometry.pixel_pitch()?;
    let dt = velocity.dt();
    let above: Vec<bool> = velocity.v.iter().map(|&v| v > cfg.vel_threshold_dps).collect();
    let runs = label_runs(&above, dt, cfg);

    Ok(runs
        .into_iter()
        .map(|(kind, s, e)| {
            let t_start = velocity.t[s];
            let t_end = velocity.t[e - 1] + dt;
            let mut ev = OcularEvent {
                kind,
                t_start,
                t_end,
                duration: t_end - t_start,
                start_index: s,
                end_index: e,
                amplitude_deg: None,
                peak_velocity_dps: None,
                mean_velocity_dps: None,
                centroid_x: None,
                centroid_y: None,
            };
            match kind {
                EventKind::Saccade => {
                    let from = s.saturating_sub(1);
                    let to = e - 1;
                    ev.amplitude_deg = Some(angular_distance_deg(
                        x.v[to] - x.v[from],
                        y.v[to] - y.v[from],
                        pitch,
                        geometry.viewing_distance_mm,
                    ));
                    let seg = &velocity.v[s..e];
                    ev.peak_velocity_dps = Some(seg.iter().copied().fold(f64::MIN, f64::max));
                    ev.mean_velocity_dps = Some(seg.iter().sum::<f64>() / seg.len() as f64);
                }
                EventKind::Fixation => {
                    let len = (e - s) as f64;
                    ev.centroid_x = Some(x.v[s..e].iter().sum::<f64>() / len);
                    ev.centroid_y = Some(y.v[s..e].iter().sum::<f64>() / len);
                }
            }
            ev
        })
        .collect())
}
