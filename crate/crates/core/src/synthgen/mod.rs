//! Deterministic synthetic cohorts with planted ground truth.

mod cardiac;
mod cohort;
mod gaze;

pub use cardiac::{plan_beats, render_bvp};
pub use cohort::{
    cohort_labels, generate_cohort, synthesize_participant, CohortSummary, ParticipantTruth, PhaseParams,
    SyntheticParticipant, Truth,
};
pub use gaze::{plan_gaze, render_gaze, GazePlan, GazeState, Layout, PlannedFixation, PlannedSaccade, Region};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cardiac::cardiac_registry;
use crate::error::{Error, Result};
use crate::model::{Modality, ScreenGeometry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GazeParams {
    /// Mean fixation duration (s).
    pub fixation_duration_s: f64,
    /// Between-participant sd of the mean fixation duration.
    pub fixation_duration_sd_s: f64,
    /// Coefficient of variation of single fixation durations.
    pub fixation_duration_cv: f64,
    /// Side of the triangle joining the three fixation regions; every
    /// saccade spans roughly this distance.
    pub saccade_amplitude_px: f64,
    pub saccade_amplitude_sd_px: f64,
    pub transition_s: f64,
    /// Radius of the disc fixations are drawn from inside each region.
    pub fixation_radius_px: f64,
    /// Share of fixations on `hand_cards` and `potion_bar`; the rest go to
    /// the non-AOI region. Each share must stay at or below 0.5.
    pub dwell_hand_cards: f64,
    pub dwell_potion_bar: f64,
    pub dwell_sd: f64,
    pub noise_px: f64,
}

impl Default for GazeParams {
    fn default() -> Self {
        GazeParams {
            fixation_duration_s: 0.28,
            fixation_duration_sd_s: 0.03,
            fixation_duration_cv: 0.25,
            saccade_amplitude_px: 420.0,
            saccade_amplitude_sd_px: 40.0,
            transition_s: 0.04,
            fixation_radius_px: 45.0,
            dwell_hand_cards: 0.3,
            dwell_potion_bar: 0.3,
            dwell_sd: 0.05,
            noise_px: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PupilParams {
    pub baseline_mm: f64,
    pub baseline_sd_mm: f64,
    pub sinusoid_amplitude_mm: f64,
    pub sinusoid_hz: f64,
    /// Blinks per second; each blink invalidates `blink_duration_s` of gaze.
    pub blink_rate_hz: f64,
    pub blink_duration_s: f64,
    pub noise_mm: f64,
}

impl Default for PupilParams {
    fn default() -> Self {
        PupilParams {
            baseline_mm: 3.5,
            baseline_sd_mm: 0.3,
            sinusoid_amplitude_mm: 0.2,
            sinusoid_hz: 0.1,
            blink_rate_hz: 0.2,
            blink_duration_s: 0.12,
            noise_mm: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CardiacParams {
    pub hr_bpm: f64,
    pub hr_sd_bpm: f64,
    /// Beat-to-beat jitter of the inter-beat interval (s).
    pub ibi_sd_s: f64,
    pub ibi_sd_sd_s: f64,
    /// Heart rate alternates between `hr - delta/2` and `hr + delta/2`
    /// every `hr_switch_period_s`.
    pub hr_switch_delta_bpm: f64,
    pub hr_switch_delta_sd_bpm: f64,
    pub hr_switch_period_s: f64,
    /// Added to the heart rate during tutorial, low and high phases.
    pub phase_hr_offsets_bpm: [f64; 3],
    pub pulse_sigma_s: f64,
    pub pulse_amplitude: f64,
    pub pulse_amplitude_sd: f64,
    pub noise_sd: f64,
}

impl Default for CardiacParams {
    fn default() -> Self {
        CardiacParams {
            hr_bpm: 72.0,
            hr_sd_bpm: 6.0,
            ibi_sd_s: 0.03,
            ibi_sd_sd_s: 0.008,
            hr_switch_delta_bpm: 4.0,
            hr_switch_delta_sd_bpm: 1.5,
            hr_switch_period_s: 30.0,
            phase_hr_offsets_bpm: [0.0; 3],
            pulse_sigma_s: 0.08,
            pulse_amplitude: 1.0,
            pulse_amplitude_sd: 0.1,
            noise_sd: 0.02,
        }
    }
}

/// Generator quantities that planted effects shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    DwellHandCards,
    DwellPotionBar,
    SaccadeAmplitude,
    FixationDuration,
    PupilBaseline,
    HeartRate,
    IbiJitter,
    HrSwitch,
    PulseAmplitude,
}

impl Param {
    pub fn modality(self) -> Modality {
        match self {
            Param::HeartRate | Param::IbiJitter | Param::HrSwitch | Param::PulseAmplitude => Modality::Cardiac,
            _ => Modality::Ocular,
        }
    }

    /// Generator parameter that drives a registry feature.
    pub fn for_feature(feature: &str) -> Result<Param> {
        let p = match feature {
            f if f.starts_with("aoi_hand_cards_") => Param::DwellHandCards,
            f if f.starts_with("aoi_potion_bar_") => Param::DwellPotionBar,
            "saccade_amplitude_mean" | "saccade_amplitude_max" | "saccade_velocity_max" => Param::SaccadeAmplitude,
            "saccade_count_mean" | "saccade_rate" | "saccade_fixation_ratio" => Param::FixationDuration,
            f if f.starts_with("fixation_") => Param::FixationDuration,
            f if f.starts_with("pupil_") => Param::PupilBaseline,
            "hr_mean" | "mean_nn" => Param::HeartRate,
            "hr_range" => Param::HrSwitch,
            "rmssd" | "pnn50" | "pnn20" => Param::IbiJitter,
            f if f.starts_with("bvp_") => Param::PulseAmplitude,
            other => {
                return Err(Error::invalid(format!("no generator parameter drives feature {other:?}")));
            }
        };
        Ok(p)
    }
}

/// A group difference of `d` between-participant sd units, added to Win
/// participants during the LowComplexity phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedEffect {
    pub feature: String,
    pub d: f64,
}

/// Replaces a participant's share of the planted shift for one modality.
/// Win participants default to 1 and Loss participants to 0, so a Loss
/// participant at 0.7 looks like a weak Win on that modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectOverride {
    /// Zero-based participant index.
    pub participant: usize,
    pub modality: Modality,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_participants: usize,
    pub win_fraction: f64,
    /// Tutorial, low and high phase durations in seconds.
    pub phase_durations_s: [f64; 3],
    pub gaze_rate_hz: f64,
    pub bvp_rate_hz: f64,
    pub geometry: ScreenGeometry,
    pub gaze: GazeParams,
    pub pupil: PupilParams,
    pub cardiac: CardiacParams,
    pub effects: Vec<PlantedEffect>,
    pub overrides: Vec<EffectOverride>,
}

/// Study phase lengths (3, 25 and 10 minutes) divided by five.
pub const DESK_SCALE_DURATIONS_S: [f64; 3] = [36.0, 300.0, 120.0];

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 0,
            n_participants: 35,
            win_fraction: 19.0 / 35.0,
            phase_durations_s: DESK_SCALE_DURATIONS_S,
            gaze_rate_hz: crate::model::GAZE_RATE_HZ,
            bvp_rate_hz: crate::model::BVP_RATE_HZ,
            geometry: ScreenGeometry {
                width_px: 1920.0,
                height_px: 1080.0,
                diagonal_mm: 604.52,
                viewing_distance_mm: 600.0,
            },
            gaze: GazeParams::default(),
            pupil: PupilParams::default(),
            cardiac: CardiacParams::default(),
            effects: Vec::new(),
            overrides: Vec::new(),
        }
    }
}

fn check(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!("synthetic spec: {what}")))
    }
}

impl SynthSpec {
    pub fn n_win(&self) -> usize {
        (self.win_fraction * self.n_participants as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        check(self.n_participants >= 1, "n_participants must be positive")?;
        check((0.0..=1.0).contains(&self.win_fraction), "win_fraction must lie in [0, 1]")?;
        check(
            self.phase_durations_s.iter().all(|&d| d.is_finite() && d > 0.0),
            "phase durations must be positive",
        )?;
        check(self.gaze_rate_hz > 0.0 && self.bvp_rate_hz > 0.0, "sample rates must be positive")?;
        let g = &self.gaze;
        check(g.fixation_duration_s >= 0.1, "fixation_duration_s must be at least 0.1")?;
        check(g.fixation_duration_cv >= 0.0 && g.fixation_duration_cv < 1.0, "fixation_duration_cv must lie in [0, 1)")?;
        check(g.transition_s > 0.0, "transition_s must be positive")?;
        check(
            g.saccade_amplitude_px > 2.0 * g.fixation_radius_px + 20.0,
            "saccade amplitude must clear the fixation discs",
        )?;
        check(
            (0.0..=0.5).contains(&g.dwell_hand_cards) && (0.0..=0.5).contains(&g.dwell_potion_bar),
            "AOI dwell shares must lie in [0, 0.5]",
        )?;
        check(
            g.dwell_hand_cards + g.dwell_potion_bar >= 0.5,
            "the non-AOI region can hold at most half of the fixations",
        )?;
        let sds = [
            g.fixation_duration_sd_s,
            g.saccade_amplitude_sd_px,
            g.dwell_sd,
            g.noise_px,
            self.pupil.baseline_sd_mm,
            self.pupil.noise_mm,
            self.cardiac.hr_sd_bpm,
            self.cardiac.ibi_sd_s,
            self.cardiac.ibi_sd_sd_s,
            self.cardiac.hr_switch_delta_sd_bpm,
            self.cardiac.pulse_amplitude_sd,
            self.cardiac.noise_sd,
        ];
        check(sds.iter().all(|&s| s.is_finite() && s >= 0.0), "spreads and noise levels must be non-negative")?;
        check(self.pupil.blink_rate_hz >= 0.0 && self.pupil.blink_duration_s > 0.0, "invalid blink schedule")?;
        check(self.cardiac.hr_bpm > 30.0 && self.cardiac.hr_bpm < 200.0, "hr_bpm must lie in (30, 200)")?;
        check(self.cardiac.pulse_sigma_s > 0.0, "pulse_sigma_s must be positive")?;
        check(self.cardiac.hr_switch_period_s > 0.0, "hr_switch_period_s must be positive")?;
        self.effect_shifts()?;
        for o in &self.overrides {
            check(o.participant < self.n_participants, "override refers to a missing participant")?;
            check(o.level.is_finite(), "override levels must be finite")?;
        }
        Ok(())
    }

    /// Between-participant sd of each parameter, the unit of planted effects.
    pub fn param_sd(&self, p: Param) -> f64 {
        match p {
            Param::DwellHandCards | Param::DwellPotionBar => self.gaze.dwell_sd,
            Param::SaccadeAmplitude => self.gaze.saccade_amplitude_sd_px,
            Param::FixationDuration => self.gaze.fixation_duration_sd_s,
            Param::PupilBaseline => self.pupil.baseline_sd_mm,
            Param::HeartRate => self.cardiac.hr_sd_bpm,
            Param::IbiJitter => self.cardiac.ibi_sd_sd_s,
            Param::HrSwitch => self.cardiac.hr_switch_delta_sd_bpm,
            Param::PulseAmplitude => self.cardiac.pulse_amplitude_sd,
        }
    }

    /// Effect size per driven parameter; features sharing a parameter must
    /// agree on `d`.
    pub fn effect_shifts(&self) -> Result<BTreeMap<Param, f64>> {
        let mut out: BTreeMap<Param, f64> = BTreeMap::new();
        for e in &self.effects {
            check(e.d.is_finite(), "effect sizes must be finite")?;
            let p = Param::for_feature(&e.feature)?;
            if let Some(&prev) = out.get(&p) {
                if prev != e.d {
                    return Err(Error::invalid(format!(
                        "features driven by {p:?} were planted with different effect sizes"
                    )));
                }
            }
            out.insert(p, e.d);
        }
        Ok(out)
    }
}

/// Plants a group difference of `d` pooled-sd units on the named features.
pub fn plant_separability(spec: &SynthSpec, features: &[&str], d: f64) -> Result<SynthSpec> {
    let known = known_features();
    let mut out = spec.clone();
    for &f in features {
        if !known.iter().any(|k| k == f) {
            return Err(Error::invalid(format!("unknown feature {f:?}")));
        }
        Param::for_feature(f)?;
        out.effects.retain(|e| e.feature != f);
        out.effects.push(PlantedEffect { feature: f.to_string(), d });
    }
    out.validate()?;
    Ok(out)
}

/// Registry names the generator can drive.
pub fn known_features() -> Vec<String> {
    let mut names = crate::ocular::ocular_registry(&Layout::default_aois());
    names.extend(cardiac_registry());
    names.retain(|f| Param::for_feature(f).is_ok());
    names
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_is_valid_and_study_shaped() {
        let s = SynthSpec::default();
        s.validate().unwrap();
        assert_eq!(s.n_win(), 19);
        assert_eq!(s.n_participants - s.n_win(), 16);
    }

    #[test]
    fn planting_unknown_feature_fails() {
        let s = SynthSpec::default();
        assert!(plant_separability(&s, &["nope"], 1.0).is_err());
        assert!(plant_separability(&s, &["nn_ratio"], 1.0).is_err());
        let p = plant_separability(&s, &["aoi_hand_cards_proportion", "hr_mean"], 3.0).unwrap();
        let shifts = p.effect_shifts().unwrap();
        assert_eq!(shifts[&Param::DwellHandCards], 3.0);
        assert_eq!(shifts[&Param::HeartRate], 3.0);
    }

    #[test]
    fn conflicting_effects_rejected() {
        let mut s = SynthSpec::default();
        s.effects = vec![
            PlantedEffect { feature: "hr_mean".into(), d: 1.0 },
            PlantedEffect { feature: "mean_nn".into(), d: 2.0 },
        ];
        assert!(s.validate().is_err());
    }

    #[test]
    fn spec_json_round_trip_rejects_unknown_keys() {
        let s = SynthSpec::default();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<SynthSpec>(&text).unwrap(), s);
        assert!(serde_json::from_str::<SynthSpec>(r#"{"seed": 1, "bogus": 2}"#).is_err());
        let partial: SynthSpec = serde_json::from_str(r#"{"seed": 5, "n_participants": 4}"#).unwrap();
        assert_eq!((partial.seed, partial.n_participants), (5, 4));
    }
}
