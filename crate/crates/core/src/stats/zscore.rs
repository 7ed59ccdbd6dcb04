use crate::model::{Dataset, FeatureTable, Modality};

/// Column-wise z-scores over all windows of one table, using the sample
/// standard deviation. Missing values stay missing. Columns with fewer than
/// two values or no spread become zeros and are reported by name.
pub fn zscore_within_subject(table: &FeatureTable) -> (FeatureTable, Vec<String>) {
    let mut out = table.clone();
    let mut degenerate = Vec::new();
    for (c, name) in table.registry().iter().enumerate() {
        let vals: Vec<f64> = table.windows().iter().filter_map(|w| w.values[c]).collect();
        let n = vals.len();
        let mean = if n > 0 { vals.iter().sum::<f64>() / n as f64 } else { 0.0 };
        let sd = if n > 1 {
            (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let flat = !(sd > 1e-12 * mean.abs().max(1.0));
        if flat && n > 0 {
            degenerate.push(name.clone());
        }
        for w in out.windows_mut() {
            if let Some(v) = w.values[c].as_mut() {
                *v = if flat { 0.0 } else { (*v - mean) / sd };
            }
        }
    }
    (out, degenerate)
}

/// Z-scores every participant's table of `modality`; returns
/// `(participant, feature)` pairs that were flattened to zero.
pub fn zscore_dataset(ds: &Dataset, modality: Modality) -> (Dataset, Vec<(String, String)>) {
    let mut out = ds.clone();
    let mut warnings = Vec::new();
    for p in &mut out.participants {
        let (z, flat) = zscore_within_subject(p.table(modality));
        warnings.extend(flat.into_iter().map(|f| (p.id.clone(), f)));
        *p.table_mut(modality) = z;
    }
    (out, warnings)
}
