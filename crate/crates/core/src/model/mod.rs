//! Shared domain types, on-disk formats and the dataset container.

mod features;
mod io;
mod manifest;

pub use features::{
    Dataset, FeatureTable, FeatureWindow, Modality, ParticipantRecord,
};
pub use io::{
    load_bvp, load_gaze, read_feature_csv, read_labels_csv, write_bvp, write_feature_csv,
    write_gaze, write_labels_csv, LoadOptions,
};
pub use manifest::{pixel_pitch, AoiRect, Label, Phase, PhaseSpan, ScreenGeometry, SessionManifest};

/// One eye-tracker reading. Positions are screen pixels, pupils millimetres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeSample {
    pub t: f64,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub pupil_left: Option<f64>,
    pub pupil_right: Option<f64>,
    pub valid: bool,
}

impl GazeSample {
    /// Gaze point, or `None` when the tracker flagged the sample invalid.
    pub fn position(&self) -> Option<(f64, f64)> {
        if !self.valid {
            return None;
        }
        Some((self.x?, self.y?))
    }

    pub fn left_pupil(&self) -> Option<f64> {
        self.pupil_left.filter(|_| self.valid)
    }

    pub fn right_pupil(&self) -> Option<f64> {
        self.pupil_right.filter(|_| self.valid)
    }

    /// Binocular mean, falling back to whichever eye is available.
    pub fn mean_pupil(&self) -> Option<f64> {
        match (self.left_pupil(), self.right_pupil()) {
            (Some(l), Some(r)) => Some(0.5 * (l + r)),
            (one, other) => one.or(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvpSample {
    pub t: f64,
    pub value: f64,
}

/// Anything carrying a recording-clock timestamp in seconds.
pub trait Timestamped {
    fn time(&self) -> f64;
}

impl Timestamped for GazeSample {
    fn time(&self) -> f64 {
        self.t
    }
}

impl Timestamped for BvpSample {
    fn time(&self) -> f64 {
        self.t
    }
}

pub const GAZE_RATE_HZ: f64 = 250.0;
pub const BVP_RATE_HZ: f64 = 64.0;
