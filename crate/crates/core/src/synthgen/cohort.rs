use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cardiac::{plan_beats, render_bvp};
use super::gaze::{dwell_vector, plan_gaze, render_gaze, GazeState, Layout, PlannedFixation, PlannedSaccade};
use super::{Param, SynthSpec};
use crate::error::{Error, Result};
use crate::model::{
    write_bvp, write_gaze, BvpSample, GazeSample, Label, Modality, Phase, PhaseSpan, SessionManifest,
};

/// Generator parameters in force during one phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseParams {
    pub phase: Phase,
    pub fixation_duration_s: f64,
    pub saccade_amplitude_px: f64,
    pub dwell_hand_cards: f64,
    pub dwell_potion_bar: f64,
    pub dwell_elsewhere: f64,
    pub pupil_baseline_mm: f64,
    pub hr_bpm: f64,
    pub ibi_sd_s: f64,
    pub hr_switch_delta_bpm: f64,
    pub pulse_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantTruth {
    pub participant_id: String,
    pub label: Label,
    /// Share of the planted shift applied, per modality.
    pub effect_levels: BTreeMap<Modality, f64>,
    pub phases: Vec<PhaseParams>,
    pub fixations: Vec<PlannedFixation>,
    pub saccades: Vec<PlannedSaccade>,
    pub blinks: Vec<(f64, f64)>,
    pub beats: Vec<f64>,
}

impl ParticipantTruth {
    pub fn phase(&self, phase: Phase) -> &PhaseParams {
        self.phases.iter().find(|p| p.phase == phase).expect("every phase is generated")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub spec: SynthSpec,
    /// Low-phase shift of a full-level participant, in parameter units.
    pub shifts: BTreeMap<Param, f64>,
    pub participants: Vec<ParticipantTruth>,
}

/// One generated participant, kept in memory.
#[derive(Debug, Clone)]
pub struct SyntheticParticipant {
    pub manifest: SessionManifest,
    pub gaze: Vec<GazeSample>,
    pub bvp: Vec<BvpSample>,
    pub truth: ParticipantTruth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortSummary {
    pub out_dir: PathBuf,
    pub manifests: Vec<PathBuf>,
    pub truth_path: PathBuf,
    pub n_win: usize,
    pub n_loss: usize,
}

fn participant_id(spec: &SynthSpec, index: usize) -> String {
    let width = spec.n_participants.to_string().len().max(2);
    format!("p{:0width$}", index + 1)
}

/// Labels for the whole cohort: `n_win` Win labels in a seeded order.
pub fn cohort_labels(spec: &SynthSpec) -> Vec<Label> {
    let mut labels: Vec<Label> = (0..spec.n_participants)
        .map(|i| if i < spec.n_win() { Label::Win } else { Label::Loss })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    labels.shuffle(&mut rng);
    labels
}

fn participant_rng(spec: &SynthSpec, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64 + 1);
    rng
}

fn spans(spec: &SynthSpec) -> Vec<PhaseSpan> {
    let mut t = 0.0;
    Phase::ALL
        .iter()
        .zip(spec.phase_durations_s)
        .map(|(&phase, d)| {
            let span = PhaseSpan { phase, t_start: t, t_end: t + d };
            t += d;
            span
        })
        .collect()
}

fn phase_index(spans: &[PhaseSpan], t: f64) -> usize {
    spans.iter().position(|s| s.contains(t)).unwrap_or(spans.len() - 1)
}

fn draw(rng: &mut dyn RngCore, mean: f64, sd: f64) -> f64 {
    if sd > 0.0 {
        Normal::new(mean, sd).expect("spread validated").sample(rng)
    } else {
        mean
    }
}

fn phase_params(
    spec: &SynthSpec,
    layout: &Layout,
    base: &BTreeMap<Param, f64>,
    shifts: &BTreeMap<Param, f64>,
    levels: &BTreeMap<Modality, f64>,
) -> Vec<PhaseParams> {
    Phase::ALL
        .iter()
        .enumerate()
        .map(|(pi, &phase)| {
            let value = |p: Param| {
                let shift = match (phase, shifts.get(&p)) {
                    (Phase::Low, Some(s)) => s * levels[&p.modality()],
                    _ => 0.0,
                };
                base[&p] + shift
            };
            let dwell = dwell_vector(value(Param::DwellHandCards), value(Param::DwellPotionBar));
            PhaseParams {
                phase,
                fixation_duration_s: value(Param::FixationDuration).max(0.1),
                saccade_amplitude_px: layout.clamp_side(value(Param::SaccadeAmplitude)),
                dwell_hand_cards: dwell[0],
                dwell_potion_bar: dwell[1],
                dwell_elsewhere: dwell[2],
                pupil_baseline_mm: value(Param::PupilBaseline).max(1.5),
                hr_bpm: (value(Param::HeartRate) + spec.cardiac.phase_hr_offsets_bpm[pi]).clamp(40.0, 150.0),
                ibi_sd_s: value(Param::IbiJitter).max(0.0),
                hr_switch_delta_bpm: value(Param::HrSwitch).max(0.0),
                pulse_amplitude: value(Param::PulseAmplitude).max(0.2),
            }
        })
        .collect()
}

/// Generates participant `index` of the cohort. Output depends only on the
/// spec and the index.
pub fn synthesize_participant(spec: &SynthSpec, index: usize) -> Result<SyntheticParticipant> {
    spec.validate()?;
    if index >= spec.n_participants {
        return Err(Error::invalid(format!("participant index {index} out of range")));
    }
    let label = cohort_labels(spec)[index];
    let id = participant_id(spec, index);
    let shifts: BTreeMap<Param, f64> =
        spec.effect_shifts()?.into_iter().map(|(p, d)| (p, d * spec.param_sd(p))).collect();
    let mut levels: BTreeMap<Modality, f64> =
        Modality::ALL.iter().map(|&m| (m, f64::from(label.as_class()))).collect();
    for o in spec.overrides.iter().filter(|o| o.participant == index) {
        levels.insert(o.modality, o.level);
    }

    let mut rng = participant_rng(spec, index);
    let g = &spec.gaze;
    let c = &spec.cardiac;
    let layout = Layout::new(&spec.geometry, g.fixation_radius_px);
    let base: BTreeMap<Param, f64> = [
        (Param::DwellHandCards, g.dwell_hand_cards, g.dwell_sd),
        (Param::DwellPotionBar, g.dwell_potion_bar, g.dwell_sd),
        (Param::SaccadeAmplitude, g.saccade_amplitude_px, g.saccade_amplitude_sd_px),
        (Param::FixationDuration, g.fixation_duration_s, g.fixation_duration_sd_s),
        (Param::PupilBaseline, spec.pupil.baseline_mm, spec.pupil.baseline_sd_mm),
        (Param::HeartRate, c.hr_bpm, c.hr_sd_bpm),
        (Param::IbiJitter, c.ibi_sd_s, c.ibi_sd_sd_s),
        (Param::HrSwitch, c.hr_switch_delta_bpm, c.hr_switch_delta_sd_bpm),
        (Param::PulseAmplitude, c.pulse_amplitude, c.pulse_amplitude_sd),
    ]
    .into_iter()
    .map(|(p, mean, sd)| (p, draw(&mut rng, mean, sd)))
    .collect();
    let phases = phase_params(spec, &layout, &base, &shifts, &levels);
    let spans = spans(spec);
    let total_s: f64 = spec.phase_durations_s.iter().sum();
    let at = |t: f64| &phases[phase_index(&spans, t)];

    let n_gaze = (total_s * spec.gaze_rate_hz).round() as usize;
    let plan = plan_gaze(
        &layout,
        &spec.geometry,
        n_gaze,
        spec.gaze_rate_hz,
        |t| {
            let p = at(t);
            GazeState {
                fixation_duration_s: p.fixation_duration_s,
                fixation_duration_cv: g.fixation_duration_cv,
                side_px: p.saccade_amplitude_px,
                dwell: [p.dwell_hand_cards, p.dwell_potion_bar, p.dwell_elsewhere],
                transition_s: g.transition_s,
                blink_rate_hz: spec.pupil.blink_rate_hz,
                blink_duration_s: spec.pupil.blink_duration_s,
            }
        },
        &mut rng,
    );
    let pu = &spec.pupil;
    let gaze = render_gaze(
        &plan,
        n_gaze,
        spec.gaze_rate_hz,
        g.noise_px,
        |t, r| {
            let level = at(t).pupil_baseline_mm
                + pu.sinusoid_amplitude_mm * (std::f64::consts::TAU * pu.sinusoid_hz * t).sin();
            let left = draw(r, level, pu.noise_mm);
            let right = draw(r, level + 0.05, pu.noise_mm);
            (left, right)
        },
        &mut rng,
    );

    let hr_at = |t: f64| {
        let p = at(t);
        let sign = if (t / c.hr_switch_period_s).floor() as i64 % 2 == 0 { -0.5 } else { 0.5 };
        (p.hr_bpm + sign * p.hr_switch_delta_bpm).max(30.0)
    };
    let beats = plan_beats(total_s, hr_at, |t| at(t).ibi_sd_s, &mut rng);
    let n_bvp = (total_s * spec.bvp_rate_hz).round() as usize;
    let bvp = render_bvp(
        &beats,
        n_bvp,
        spec.bvp_rate_hz,
        c.pulse_sigma_s,
        |t| at(t).pulse_amplitude,
        c.noise_sd,
        &mut rng,
    );

    let manifest = SessionManifest {
        participant_id: id.clone(),
        label,
        geometry: spec.geometry,
        aois: layout.aois(),
        phases: spans,
        gaze_path: PathBuf::from(format!("../raw/{id}_gaze.csv")),
        bvp_path: PathBuf::from(format!("../raw/{id}_bvp.csv")),
    };
    manifest.validate()?;
    let truth = ParticipantTruth {
        participant_id: id,
        label,
        effect_levels: levels,
        phases,
        fixations: plan.fixations,
        saccades: plan.saccades,
        blinks: plan.blinks,
        beats,
    };
    Ok(SyntheticParticipant { manifest, gaze, bvp, truth })
}

/// Writes `manifests/<id>.json`, `raw/<id>_gaze.csv`, `raw/<id>_bvp.csv`
/// and `truth.json` under `out_dir`.
pub fn generate_cohort(spec: &SynthSpec, out_dir: &Path) -> Result<CohortSummary> {
    spec.validate()?;
    let manifest_dir = out_dir.join("manifests");
    let raw_dir = out_dir.join("raw");
    for d in [&manifest_dir, &raw_dir] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let generated = (0..spec.n_participants)
        .into_par_iter()
        .map(|index| synthesize_participant(spec, index))
        .collect::<Result<Vec<_>>>()?;
    let mut manifests = Vec::with_capacity(spec.n_participants);
    let mut participants = Vec::with_capacity(spec.n_participants);
    for p in generated {
        let id = &p.manifest.participant_id;
        write_gaze(&manifest_dir.join(&p.manifest.gaze_path), &p.gaze)?;
        write_bvp(&manifest_dir.join(&p.manifest.bvp_path), &p.bvp)?;
        let path = manifest_dir.join(format!("{id}.json"));
        p.manifest.save(&path)?;
        log::debug!("generated {id} ({})", p.manifest.label);
        manifests.push(path);
        participants.push(p.truth);
    }
    let shifts = spec.effect_shifts()?.into_iter().map(|(p, d)| (p, d * spec.param_sd(p))).collect();
    let truth = Truth { spec: spec.clone(), shifts, participants };
    let truth_path = out_dir.join("truth.json");
    let text = serde_json::to_string_pretty(&truth).expect("truth serializes");
    crate::stats::write_file(&truth_path, &(text + "\n"))?;
    let n_win = spec.n_win();
    Ok(CohortSummary {
        out_dir: out_dir.to_path_buf(),
        manifests,
        truth_path,
        n_win,
        n_loss: spec.n_participants - n_win,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::plant_separability;

    fn small() -> SynthSpec {
        SynthSpec { n_participants: 6, win_fraction: 0.5, phase_durations_s: [4.0, 6.0, 4.0], ..SynthSpec::default() }
    }

    #[test]
    fn labels_follow_win_fraction() {
        let spec = SynthSpec::default();
        let labels = cohort_labels(&spec);
        assert_eq!(labels.iter().filter(|&&l| l == Label::Win).count(), 19);
        assert_ne!(labels, cohort_labels(&SynthSpec { seed: 1, ..spec }));
    }

    #[test]
    fn participants_are_reproducible_and_independent_of_cohort_order() {
        let spec = small();
        let a = synthesize_participant(&spec, 2).unwrap();
        let b = synthesize_participant(&spec, 2).unwrap();
        assert_eq!(a.gaze, b.gaze);
        assert_eq!(a.bvp, b.bvp);
        assert_eq!(a.truth, b.truth);
        let other = synthesize_participant(&spec, 3).unwrap();
        assert_ne!(a.gaze, other.gaze);
    }

    #[test]
    fn streams_cover_the_session() {
        let spec = small();
        let p = synthesize_participant(&spec, 0).unwrap();
        assert_eq!(p.gaze.len(), 14 * 250);
        assert_eq!(p.bvp.len(), 14 * 64);
        assert!(p.gaze.iter().filter(|s| s.valid).all(|s| spec.geometry.contains(s.x.unwrap(), s.y.unwrap())));
        assert_eq!(p.manifest.aois.len(), 2);
    }

    #[test]
    fn shift_lands_on_win_low_phase_only() {
        let spec = plant_separability(&small(), &["hr_mean"], 2.0).unwrap();
        let labels = cohort_labels(&spec);
        for (i, label) in labels.iter().enumerate() {
            let t = synthesize_participant(&spec, i).unwrap().truth;
            let low = t.phase(Phase::Low).hr_bpm;
            let tut = t.phase(Phase::Tutorial).hr_bpm;
            let expected = if *label == Label::Win { 2.0 * spec.cardiac.hr_sd_bpm } else { 0.0 };
            assert!((low - tut - expected).abs() < 1e-9, "{i}");
        }
    }

    #[test]
    fn override_sets_the_level() {
        let mut spec = plant_separability(&small(), &["aoi_hand_cards_proportion"], 1.0).unwrap();
        let loser = cohort_labels(&spec).iter().position(|&l| l == Label::Loss).unwrap();
        spec.overrides.push(super::super::EffectOverride { participant: loser, modality: Modality::Ocular, level: 1.0 });
        let t = synthesize_participant(&spec, loser).unwrap().truth;
        assert_eq!(t.effect_levels[&Modality::Ocular], 1.0);
        assert_eq!(t.effect_levels[&Modality::Cardiac], 0.0);
        let shift = t.phase(Phase::Low).dwell_hand_cards - t.phase(Phase::High).dwell_hand_cards;
        assert!(shift > 0.0);
    }
}
