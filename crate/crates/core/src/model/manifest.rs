use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenGeometry {
    pub width_px: f64,
    pub height_px: f64,
    pub diagonal_mm: f64,
    pub viewing_distance_mm: f64,
}

impl ScreenGeometry {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("width_px", self.width_px),
            ("height_px", self.height_px),
            ("diagonal_mm", self.diagonal_mm),
            ("viewing_distance_mm", self.viewing_distance_mm),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!(
                    "screen geometry {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn pixel_pitch(&self) -> Result<f64> {
        pixel_pitch(self)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..self.width_px).contains(&x) && (0.0..self.height_px).contains(&y)
    }
}

/// Millimetres per pixel along the panel diagonal.
pub fn pixel_pitch(geometry: &ScreenGeometry) -> Result<f64> {
    geometry.validate()?;
    Ok(geometry.diagonal_mm / geometry.width_px.hypot(geometry.height_px))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoiRect {
    pub name: String,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl AoiRect {
    /// Half-open containment, matching the on-screen rule.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Tutorial,
    Low,
    High,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Tutorial, Phase::Low, Phase::High];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Tutorial => "tutorial",
            Phase::Low => "low",
            Phase::High => "high",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tutorial" => Ok(Phase::Tutorial),
            "low" => Ok(Phase::Low),
            "high" => Ok(Phase::High),
            other => Err(Error::invalid(format!("unknown phase {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpan {
    pub phase: Phase,
    pub t_start: f64,
    pub t_end: f64,
}

impl PhaseSpan {
    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_start && t < self.t_end
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

/// Outcome of the high-complexity session. Class 1 is `Win`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Loss,
    Win,
}

impl Label {
    pub fn as_class(self) -> u8 {
        match self {
            Label::Loss => 0,
            Label::Win => 1,
        }
    }

    pub fn from_class(c: u8) -> Self {
        if c == 0 {
            Label::Loss
        } else {
            Label::Win
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Loss => "loss",
            Label::Win => "win",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "win" => Ok(Label::Win),
            "loss" => Ok(Label::Loss),
            other => Err(Error::invalid(format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionManifest {
    pub participant_id: String,
    pub label: Label,
    pub geometry: ScreenGeometry,
    pub aois: Vec<AoiRect>,
    pub phases: Vec<PhaseSpan>,
    pub gaze_path: PathBuf,
    pub bvp_path: PathBuf,
}

impl SessionManifest {
    /// Reads and validates `manifest.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: SessionManifest = serde_json::from_str(&text)
            .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        manifest
            .validate()
            .map_err(|e| e.context(path.display().to_string()))?;
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.participant_id.trim().is_empty() {
            return Err(Error::invalid("participant_id is empty"));
        }
        self.geometry.validate()?;

        let mut names = BTreeSet::new();
        for aoi in &self.aois {
            if !names.insert(aoi.name.as_str()) {
                return Err(Error::invalid(format!("duplicate AOI name {:?}", aoi.name)));
            }
            if !(aoi.x0 < aoi.x1 && aoi.y0 < aoi.y1) {
                return Err(Error::invalid(format!("AOI {:?} has empty extent", aoi.name)));
            }
            if aoi.x0 < 0.0
                || aoi.y0 < 0.0
                || aoi.x1 > self.geometry.width_px
                || aoi.y1 > self.geometry.height_px
            {
                return Err(Error::invalid(format!(
                    "AOI {:?} lies outside the {}x{} screen",
                    aoi.name, self.geometry.width_px, self.geometry.height_px
                )));
            }
        }

        if self.phases.len() != Phase::ALL.len() {
            return Err(Error::invalid(format!(
                "expected exactly {} phase spans, got {}",
                Phase::ALL.len(),
                self.phases.len()
            )));
        }
        let mut previous_end = f64::NEG_INFINITY;
        for (span, expected) in self.phases.iter().zip(Phase::ALL) {
            if span.phase != expected {
                return Err(Error::invalid(format!(
                    "phase spans must be ordered tutorial, low, high; found {} where {} expected",
                    span.phase, expected
                )));
            }
            if !(span.t_start.is_finite() && span.t_end.is_finite() && span.t_start < span.t_end) {
                return Err(Error::invalid(format!("phase {} has an empty span", span.phase)));
            }
            if span.t_start < previous_end {
                return Err(Error::invalid(format!(
                    "phase {} overlaps the preceding phase",
                    span.phase
                )));
            }
            previous_end = span.t_end;
        }
        Ok(())
    }

    pub fn span(&self, phase: Phase) -> PhaseSpan {
        *self
            .phases
            .iter()
            .find(|s| s.phase == phase)
            .expect("validated manifest has every phase")
    }

    /// Resolves a data path relative to the manifest's directory.
    pub fn resolve(&self, manifest_dir: &Path, relative: &Path) -> PathBuf {
        if relative.is_absolute() {
            relative.to_path_buf()
        } else {
            manifest_dir.join(relative)
        }
    }
}
