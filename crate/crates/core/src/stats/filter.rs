use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{mann_whitney_u, qq_points, shapiro_wilk, MwuMethod};
use crate::error::{Error, Result};
use crate::model::{Dataset, Label, Modality, Phase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Winners have the larger median.
    Higher,
    Lower,
    Equal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureReport {
    pub feature: String,
    pub n_win: usize,
    pub n_loss: usize,
    pub shapiro_p_win: Option<f64>,
    pub shapiro_p_loss: Option<f64>,
    pub normal_win: Option<bool>,
    pub normal_loss: Option<bool>,
    pub test: &'static str,
    pub statistic: f64,
    pub p_value: f64,
    pub direction: Direction,
    pub significant: bool,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Participant-level values of one feature: mean over that participant's
/// windows, optionally restricted to one phase.
pub fn participant_means(
    ds: &Dataset,
    modality: Modality,
    feature: usize,
    phase: Option<Phase>,
    label: Label,
) -> Vec<f64> {
    ds.participants
        .iter()
        .filter(|p| p.label == label)
        .filter_map(|p| {
            let vals: Vec<f64> = p
                .table(modality)
                .windows()
                .iter()
                .filter(|w| phase.is_none_or(|ph| w.phase == ph))
                .filter_map(|w| w.values[feature])
                .collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect()
}

/// Per-feature normality checks and Mann-Whitney U group comparison of
/// participant means, ranked by p-value (ties keep registry order).
pub fn statistical_filter(
    ds: &Dataset,
    modality: Modality,
    phase: Option<Phase>,
    alpha: f64,
) -> Result<Vec<FeatureReport>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if ds.count(Label::Win) == 0 || ds.count(Label::Loss) == 0 {
        return Err(Error::data("statistical filtering needs both outcome groups"));
    }
    let mut rows = Vec::new();
    for (c, feature) in ds.registry(modality).iter().enumerate() {
        let win = participant_means(ds, modality, c, phase, Label::Win);
        let loss = participant_means(ds, modality, c, phase, Label::Loss);
        let sw = |v: &[f64]| shapiro_wilk(v).ok().map(|r| r.p_value);
        let (sp_w, sp_l) = (sw(&win), sw(&loss));
        let (statistic, p_value, direction) = if win.is_empty() || loss.is_empty() {
            (f64::NAN, 1.0, Direction::Equal)
        } else {
            let r = mann_whitney_u(&win, &loss, MwuMethod::Auto)?;
            let (mw, ml) = (median(&win), median(&loss));
            let dir = if mw > ml {
                Direction::Higher
            } else if mw < ml {
                Direction::Lower
            } else {
                Direction::Equal
            };
            (r.statistic, r.p_value, dir)
        };
        rows.push(FeatureReport {
            feature: feature.clone(),
            n_win: win.len(),
            n_loss: loss.len(),
            shapiro_p_win: sp_w,
            shapiro_p_loss: sp_l,
            normal_win: sp_w.map(|p| p > alpha),
            normal_loss: sp_l.map(|p| p > alpha),
            test: "mann_whitney_u",
            statistic,
            p_value,
            direction,
            significant: p_value < alpha,
        });
    }
    rows.sort_by(|a, b| a.p_value.total_cmp(&b.p_value));
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// CSV `feature,group_n,shapiro_p_win,shapiro_p_loss,test,stat,p`.
pub fn write_stats_csv(path: &Path, rows: &[FeatureReport]) -> Result<()> {
    let mut out = String::from("feature,group_n,shapiro_p_win,shapiro_p_loss,test,stat,p\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.feature,
            r.n_win + r.n_loss,
            opt(r.shapiro_p_win),
            opt(r.shapiro_p_loss),
            r.test,
            if r.statistic.is_finite() { r.statistic.to_string() } else { String::new() },
            r.p_value
        ));
    }
    write_file(path, &out)
}

/// Q-Q CSV `feature,group,theoretical,sample` for one feature.
pub fn write_qq_csv(
    path: &Path,
    ds: &Dataset,
    modality: Modality,
    feature: &str,
    phase: Option<Phase>,
) -> Result<()> {
    let c = ds
        .registry(modality)
        .iter()
        .position(|f| f == feature)
        .ok_or_else(|| Error::invalid(format!("unknown {modality} feature {feature:?}")))?;
    let mut out = String::from("feature,group,theoretical,sample\n");
    for label in [Label::Win, Label::Loss] {
        for (q, v) in qq_points(&participant_means(ds, modality, c, phase, label)) {
            out.push_str(&format!("{feature},{label},{q},{v}\n"));
        }
    }
    write_file(path, &out)
}

pub(crate) fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(content.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FeatureTable, FeatureWindow, ParticipantRecord};

    fn dataset() -> Dataset {
        let mut ps = Vec::new();
        for i in 0..16 {
            let label = if i < 8 { Label::Win } else { Label::Loss };
            let mut t = FeatureTable::new(vec!["same".into(), "planted".into(), "noise".into()]);
            for w in 0..4 {
                let planted = if label == Label::Win { 2.0 } else { -2.0 } + 0.1 * (i * 7 % 5) as f64;
                t.push(FeatureWindow {
                    participant_id: format!("p{i}"),
                    phase: Phase::Low,
                    window_index: w,
                    t_start: w as f64,
                    t_end: w as f64 + 1.0,
                    values: vec![Some(1.0), Some(planted), Some(((i * 13 + w * 5) % 11) as f64)],
                })
                .unwrap();
            }
            ps.push(ParticipantRecord {
                id: format!("p{i}"),
                label,
                ocular: t,
                cardiac: FeatureTable::new(vec![]),
            });
        }
        Dataset::new(ps).unwrap()
    }

    #[test]
    fn ranks_planted_first_and_identical_last() {
        let rows = statistical_filter(&dataset(), Modality::Ocular, Some(Phase::Low), 0.05).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].feature, "planted");
        assert!(rows[0].significant);
        assert_eq!(rows[0].direction, Direction::Higher);
        assert_eq!(rows[2].feature, "same");
        assert!((rows[2].p_value - 1.0).abs() < 1e-12);
        assert_eq!(rows[2].shapiro_p_win, None);
    }

    #[test]
    fn csv_has_one_row_per_feature() {
        let dir = tempfile::tempdir().unwrap();
        let rows = statistical_filter(&dataset(), Modality::Ocular, None, 0.05).unwrap();
        let p = dir.path().join("stats.csv");
        write_stats_csv(&p, &rows).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 4);
        write_qq_csv(&dir.path().join("qq.csv"), &dataset(), Modality::Ocular, "planted", None).unwrap();
        assert!(write_qq_csv(&dir.path().join("x.csv"), &dataset(), Modality::Ocular, "zz", None).is_err());
    }
}
