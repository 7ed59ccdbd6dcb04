use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Dataset, Label, Modality, Phase};

/// Group mean and standard error of one feature in one phase.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub feature: String,
    pub phase: Phase,
    pub label: Label,
    /// Participants contributing a mean.
    pub n: usize,
    pub mean: Option<f64>,
    /// Missing when fewer than two participants contribute.
    pub sem: Option<f64>,
}

/// Mean of participant means, with SEM = sample sd / sqrt(n).
pub fn group_mean_sem(participant_means: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = participant_means.len();
    if n == 0 {
        return (None, None);
    }
    let mean = participant_means.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (Some(mean), None);
    }
    let var = participant_means.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (Some(mean), Some((var / n as f64).sqrt()))
}

/// Per-phase, per-group summary of every feature of `modality`. Each
/// participant is first reduced to the mean of its non-missing window values.
pub fn phase_feature_summary(ds: &Dataset, modality: Modality) -> Result<Vec<SummaryRow>> {
    for label in [Label::Loss, Label::Win] {
        if ds.count(label) == 0 {
            return Err(Error::data(format!("no participants labelled {label}")));
        }
    }
    let registry = ds.registry(modality).to_vec();
    let mut rows = Vec::new();
    for (col, feature) in registry.iter().enumerate() {
        for phase in Phase::ALL {
            for label in [Label::Loss, Label::Win] {
                let means: Vec<f64> = ds
                    .participants
                    .iter()
                    .filter(|p| p.label == label)
                    .filter_map(|p| {
                        let vals: Vec<f64> = p
                            .table(modality)
                            .windows()
                            .iter()
                            .filter(|w| w.phase == phase)
                            .filter_map(|w| w.values[col])
                            .collect();
                        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
                    })
                    .collect();
                let (mean, sem) = group_mean_sem(&means);
                rows.push(SummaryRow {
                    feature: feature.clone(),
                    phase,
                    label,
                    n: means.len(),
                    mean,
                    sem,
                });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FeatureTable, FeatureWindow, ParticipantRecord};

    #[test]
    fn two_point_formula() {
        assert_eq!(group_mean_sem(&[1.0, 3.0]), (Some(2.0), Some(1.0)));
        assert_eq!(group_mean_sem(&[4.0, 4.0, 4.0]), (Some(4.0), Some(0.0)));
        assert_eq!(group_mean_sem(&[4.0]), (Some(4.0), None));
    }

    fn participant(id: &str, label: Label, values: &[f64]) -> ParticipantRecord {
        let mut t = FeatureTable::new(vec!["f".into()]);
        for (i, &v) in values.iter().enumerate() {
            t.push(FeatureWindow {
                participant_id: id.into(),
                phase: Phase::Low,
                window_index: i,
                t_start: i as f64,
                t_end: i as f64 + 1.0,
                values: vec![Some(v)],
            })
            .unwrap();
        }
        ParticipantRecord {
            id: id.into(),
            label,
            ocular: t,
            cardiac: FeatureTable::new(vec![]),
        }
    }

    #[test]
    fn participants_are_averaged_first() {
        let ds = Dataset::new(vec![
            // many windows must not outweigh one participant with few
            participant("a", Label::Win, &[1.0; 10]),
            participant("b", Label::Win, &[3.0]),
            participant("c", Label::Loss, &[5.0, 7.0]),
        ])
        .unwrap();
        let rows = phase_feature_summary(&ds, Modality::Ocular).unwrap();
        let win = rows.iter().find(|r| r.phase == Phase::Low && r.label == Label::Win).unwrap();
        assert_eq!((win.mean, win.sem, win.n), (Some(2.0), Some(1.0), 2));
        let loss = rows.iter().find(|r| r.phase == Phase::Low && r.label == Label::Loss).unwrap();
        assert_eq!((loss.mean, loss.sem), (Some(6.0), None));
        let high = rows.iter().find(|r| r.phase == Phase::High && r.label == Label::Win).unwrap();
        assert_eq!((high.n, high.mean), (0, None));
    }

    #[test]
    fn missing_group_is_error() {
        let ds = Dataset::new(vec![participant("a", Label::Win, &[1.0])]).unwrap();
        assert!(phase_feature_summary(&ds, Modality::Ocular).is_err());
    }
}
