use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::model::{Dataset, Label, Modality, Phase};
use crate::ocular::phase_feature_summary;
use crate::stats::{
    levene, mann_whitney_u, participant_means, shapiro_wilk, ttest_independent, LeveneCenter, MwuMethod,
};

/// Group means of one feature in one phase, with the between-group test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendRow {
    pub feature: String,
    pub phase: Phase,
    pub n_win: usize,
    pub mean_win: Option<f64>,
    pub sem_win: Option<f64>,
    pub n_loss: usize,
    pub mean_loss: Option<f64>,
    pub sem_loss: Option<f64>,
    /// `t_test` when both groups pass Shapiro-Wilk, otherwise `mann_whitney_u`.
    pub test: Option<&'static str>,
    pub p: Option<f64>,
}

fn compare(win: &[f64], loss: &[f64], alpha: f64) -> (Option<&'static str>, Option<f64>) {
    if win.is_empty() || loss.is_empty() {
        return (None, None);
    }
    let normal = |v: &[f64]| shapiro_wilk(v).is_ok_and(|r| r.p_value > alpha);
    if normal(win) && normal(loss) {
        let equal_var = levene(win, loss, LeveneCenter::Median).map_or(true, |r| r.p_value > alpha);
        if let Ok(r) = ttest_independent(win, loss, equal_var) {
            if r.p_value.is_finite() {
                return (Some("t_test"), Some(r.p_value));
            }
        }
    }
    match mann_whitney_u(win, loss, MwuMethod::Auto) {
        Ok(r) => (Some("mann_whitney_u"), Some(r.p_value)),
        Err(_) => (None, None),
    }
}

/// One row per feature and phase. Phases without any windows are left out
/// with a warning.
pub fn phase_trends(ds: &Dataset, modality: Modality, alpha: f64) -> Result<Vec<TrendRow>> {
    let summary = phase_feature_summary(ds, modality)?;
    let present: Vec<Phase> = Phase::ALL
        .into_iter()
        .filter(|&ph| ds.participants.iter().any(|p| p.table(modality).windows().iter().any(|w| w.phase == ph)))
        .collect();
    for ph in Phase::ALL.iter().filter(|ph| !present.contains(ph)) {
        log::warn!("no {modality} windows in phase {ph}; the trend table omits it");
    }
    let mut rows = Vec::new();
    for (c, feature) in ds.registry(modality).iter().enumerate() {
        for &phase in &present {
            let pick = |label: Label| {
                summary
                    .iter()
                    .find(|r| r.feature == *feature && r.phase == phase && r.label == label)
                    .expect("summary covers every feature, phase and group")
            };
            let (w, l) = (pick(Label::Win), pick(Label::Loss));
            let (test, p) = compare(
                &participant_means(ds, modality, c, Some(phase), Label::Win),
                &participant_means(ds, modality, c, Some(phase), Label::Loss),
                alpha,
            );
            rows.push(TrendRow {
                feature: feature.clone(),
                phase,
                n_win: w.n,
                mean_win: w.mean,
                sem_win: w.sem,
                n_loss: l.n,
                mean_loss: l.mean,
                sem_loss: l.sem,
                test,
                p,
            });
        }
    }
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_trends_csv(path: &Path, rows: &[TrendRow]) -> Result<()> {
    let mut out = String::from("feature,phase,n_win,mean_win,sem_win,n_loss,mean_loss,sem_loss,test,p\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.feature,
            r.phase,
            r.n_win,
            opt(r.mean_win),
            opt(r.sem_win),
            r.n_loss,
            opt(r.mean_loss),
            opt(r.sem_loss),
            r.test.unwrap_or(""),
            opt(r.p)
        );
    }
    crate::stats::write_file(path, &out)
}

/// Group mean lines with +-1 SEM bands over the phases of one feature.
pub fn trend_svg(feature: &str, rows: &[&TrendRow]) -> String {
    const W: f64 = 480.0;
    const H: f64 = 300.0;
    const PAD: f64 = 40.0;
    let groups = [
        ("win", "#1f77b4", rows.iter().map(|r| (r.mean_win, r.sem_win)).collect::<Vec<_>>()),
        ("loss", "#d62728", rows.iter().map(|r| (r.mean_loss, r.sem_loss)).collect::<Vec<_>>()),
    ];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, _, pts) in &groups {
        for &(m, s) in pts {
            if let Some(m) = m {
                let s = s.unwrap_or(0.0);
                lo = lo.min(m - s);
                hi = hi.max(m + s);
            }
        }
    }
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo, hi) = (lo - 0.5, hi + 0.5);
    }
    let n = rows.len().max(2) as f64;
    let x = |i: usize| PAD + i as f64 * (W - 2.0 * PAD) / (n - 1.0);
    let y = |v: f64| H - PAD - (v - lo) / (hi - lo) * (H - 2.0 * PAD);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <text x=\"{PAD}\" y=\"20\" font-size=\"14\">{feature}</text>\n"
    );
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(svg, "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">{}</text>", x(i), H - 12.0, r.phase);
    }
    for (name, colour, pts) in &groups {
        let valid: Vec<(usize, f64, f64)> =
            pts.iter().enumerate().filter_map(|(i, &(m, s))| m.map(|m| (i, m, s.unwrap_or(0.0)))).collect();
        if valid.is_empty() {
            continue;
        }
        let upper = valid.iter().map(|&(i, m, s)| format!("{:.2},{:.2}", x(i), y(m + s)));
        let lower = valid.iter().rev().map(|&(i, m, s)| format!("{:.2},{:.2}", x(i), y(m - s)));
        let band: Vec<String> = upper.chain(lower).collect();
        let _ = writeln!(svg, "<polygon class=\"{name}\" points=\"{}\" fill=\"{colour}\" fill-opacity=\"0.2\" stroke=\"none\"/>", band.join(" "));
        let line: Vec<String> = valid.iter().map(|&(i, m, _)| format!("{:.2},{:.2}", x(i), y(m))).collect();
        let _ = writeln!(svg, "<polyline class=\"{name}\" points=\"{}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"2\"/>", line.join(" "));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FeatureTable, FeatureWindow, ParticipantRecord};

    fn record(id: &str, label: Label, by_phase: [f64; 3]) -> ParticipantRecord {
        let mut t = FeatureTable::new(vec!["f".into(), "g".into()]);
        for (k, (&phase, v)) in Phase::ALL.iter().zip(by_phase).enumerate() {
            t.push(FeatureWindow {
                participant_id: id.into(),
                phase,
                window_index: k,
                t_start: k as f64,
                t_end: k as f64 + 1.0,
                values: vec![Some(v), Some(1.0)],
            })
            .unwrap();
        }
        ParticipantRecord { id: id.into(), label, ocular: t, cardiac: FeatureTable::new(vec!["hr_mean".into()]) }
    }

    fn dataset(win_offset: f64) -> Dataset {
        let mut ps = Vec::new();
        for i in 0..6 {
            let base = i as f64 * 0.1;
            ps.push(record(&format!("w{i}"), Label::Win, [70.0 + base + win_offset, 75.0 + base + win_offset, 80.0 + base + win_offset]));
            ps.push(record(&format!("l{i}"), Label::Loss, [70.0 + base, 75.0 + base, 80.0 + base]));
        }
        Dataset::new(ps).unwrap()
    }

    #[test]
    fn row_count_is_features_times_phases() {
        let rows = phase_trends(&dataset(0.0), Modality::Ocular, 0.05).unwrap();
        assert_eq!(rows.len(), 2 * 3);
    }

    #[test]
    fn identical_groups_give_unit_p() {
        let rows = phase_trends(&dataset(0.0), Modality::Ocular, 0.05).unwrap();
        for r in rows.iter().filter(|r| r.feature == "f") {
            assert!((r.p.unwrap() - 1.0).abs() < 1e-9, "{r:?}");
        }
    }

    #[test]
    fn monotone_trend_recovered() {
        let rows = phase_trends(&dataset(2.0), Modality::Ocular, 0.05).unwrap();
        let means: Vec<f64> = rows.iter().filter(|r| r.feature == "f").map(|r| r.mean_win.unwrap()).collect();
        assert!(means.windows(2).all(|w| w[1] > w[0]));
        assert!(rows.iter().filter(|r| r.feature == "f").all(|r| r.p.unwrap() < 0.01));
    }

    #[test]
    fn missing_phase_gives_partial_table() {
        let mut ds = dataset(0.0);
        for p in &mut ds.participants {
            let kept = p.ocular.filter_phase(Phase::Low);
            let mut t = p.ocular.filter_phase(Phase::Tutorial);
            t.extend(kept).unwrap();
            p.ocular = t;
        }
        let rows = phase_trends(&ds, Modality::Ocular, 0.05).unwrap();
        assert_eq!(rows.len(), 2 * 2);
        assert!(rows.iter().all(|r| r.phase != Phase::High));
    }

    #[test]
    fn svg_draws_both_groups() {
        let rows = phase_trends(&dataset(1.0), Modality::Ocular, 0.05).unwrap();
        let f: Vec<&TrendRow> = rows.iter().filter(|r| r.feature == "f").collect();
        let svg = trend_svg("f", &f);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<polygon").count(), 2);
    }
}
