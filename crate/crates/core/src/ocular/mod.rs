//! Fixation/saccade detection and sliding-window ocular features.

mod events;
mod summary;
mod velocity;
mod windows;

pub use events::{detect_events, DetectorConfig, EventKind, OcularEvent};
pub use summary::{group_mean_sem, phase_feature_summary, SummaryRow};
pub use velocity::{angular_distance_deg, point_velocity};
pub use windows::{
    ocular_registry, window_ocular, window_starts, OcularWindowConfig, PupilTrack,
    FINAL_OCULAR_FEATURES,
};
