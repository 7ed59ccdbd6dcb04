use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{GbdtConfig, LearnerSpec, TrainingSet};
use crate::error::{Error, Result};
use crate::fusion::{calibrate_threshold, logit_mean_pool};

/// Stratified participant-wise folds. `members` pairs a participant index
/// with its label; each fold lists participant indices.
pub fn participant_folds(members: &[(usize, u8)], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::invalid("cross-validation needs at least 2 folds"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k.min(members.len()).max(1)];
    let n_folds = folds.len();
    let mut next = 0;
    for class in [1u8, 0u8] {
        let mut ids: Vec<usize> = members.iter().filter(|m| m.1 == class).map(|m| m.0).collect();
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        for id in ids {
            folds[next % n_folds].push(id);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// One pooled out-of-fold score per participant of `data`.
#[derive(Debug, Clone, PartialEq)]
pub struct OofScore {
    pub group: usize,
    pub p: f64,
    pub y: u8,
}

pub(crate) fn group_labels(data: &TrainingSet) -> BTreeMap<usize, u8> {
    let mut out = BTreeMap::new();
    for (&g, &y) in data.groups.iter().zip(&data.y) {
        out.entry(g).or_insert(y);
    }
    out
}

/// Participant-wise cross-validated pooled scores.
pub fn oof_scores(spec: &LearnerSpec, data: &TrainingSet, k: usize, seed: u64) -> Result<Vec<OofScore>> {
    let labels = group_labels(data);
    let per_class = |c: u8| labels.values().filter(|&&y| y == c).count();
    if per_class(0) < 2 || per_class(1) < 2 {
        return Err(Error::data(
            "inner cross-validation needs at least two participants of each class",
        ));
    }
    let members: Vec<(usize, u8)> = labels.iter().map(|(&g, &y)| (g, y)).collect();
    let folds = participant_folds(&members, k, seed)?;
    let mut out = Vec::with_capacity(labels.len());
    for (fi, fold) in folds.iter().enumerate() {
        let held: Vec<usize> = (0..data.len()).filter(|&r| fold.binary_search(&data.groups[r]).is_ok()).collect();
        let train: Vec<usize> = (0..data.len()).filter(|&r| fold.binary_search(&data.groups[r]).is_err()).collect();
        let model = spec.train(&data.subset(&train), seed.wrapping_add(fi as u64 + 1))?;
        let test = data.subset(&held);
        let p = model.predict_proba(&test.x, &test.registry)?;
        for &g in fold {
            let probs: Vec<f64> = test.groups.iter().zip(&p).filter(|(&tg, _)| tg == g).map(|(_, &v)| v).collect();
            out.push(OofScore { group: g, p: logit_mean_pool(&probs)?, y: labels[&g] });
        }
    }
    out.sort_by_key(|s| s.group);
    Ok(out)
}

/// Exhaustive search maximising calibrated participant-level balanced
/// accuracy under inner cross-validation. Ties prefer fewer trees, then
/// shallower trees, then a lower learning rate.
pub fn grid_search(grid: &[GbdtConfig], data: &TrainingSet, k: usize, seed: u64) -> Result<(GbdtConfig, f64)> {
    if grid.is_empty() {
        return Err(Error::invalid("grid search over an empty grid"));
    }
    if grid.len() == 1 {
        grid[0].validate()?;
        let s = oof_scores(&LearnerSpec::Gbdt(grid[0].clone()), data, k, seed)?;
        let pairs: Vec<(f64, u8)> = s.iter().map(|o| (o.p, o.y)).collect();
        return Ok((grid[0].clone(), calibrate_threshold(&pairs).bacc));
    }
    let mut scored = Vec::with_capacity(grid.len());
    for cfg in grid {
        cfg.validate()?;
        let s = oof_scores(&LearnerSpec::Gbdt(cfg.clone()), data, k, seed)?;
        let pairs: Vec<(f64, u8)> = s.iter().map(|o| (o.p, o.y)).collect();
        scored.push((cfg, calibrate_threshold(&pairs).bacc));
    }
    scored.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then(a.0.n_trees.cmp(&b.0.n_trees))
            .then(a.0.max_depth.cmp(&b.0.max_depth))
            .then(a.0.learning_rate.total_cmp(&b.0.learning_rate))
    });
    Ok((scored[0].0.clone(), scored[0].1))
}

/// Cartesian product over tree count, depth and learning rate, other
/// settings taken from `base`.
pub fn lattice(base: &GbdtConfig, n_trees: &[usize], depths: &[usize], rates: &[f64]) -> Vec<GbdtConfig> {
    let mut out = Vec::new();
    for &n in n_trees {
        for &d in depths {
            for &lr in rates {
                out.push(GbdtConfig { n_trees: n, max_depth: d, learning_rate: lr, ..base.clone() });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::Matrix;

    /// Eight participants whose class depends on the XOR of two features.
    fn xor_set(seed: u64) -> TrainingSet {
        let mut rows = Vec::new();
        let (mut y, mut groups) = (Vec::new(), Vec::new());
        let mut s = seed.wrapping_mul(2654435761).wrapping_add(1);
        let mut noise = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as f64 / (1u64 << 31) as f64 - 0.5) * 0.4
        };
        for g in 0..12 {
            let (a, b) = ((g % 2) as f64, ((g / 2) % 2) as f64);
            let label = u8::from((a > 0.5) != (b > 0.5));
            for _ in 0..15 {
                rows.push(vec![a + noise(), b + noise()]);
                y.push(label);
                groups.push(g);
            }
        }
        TrainingSet::new(Matrix::from_rows(&rows).unwrap(), y, groups, vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn folds_are_stratified_and_cover_everyone() {
        let members: Vec<(usize, u8)> = (0..10).map(|i| (i, u8::from(i < 4))).collect();
        let folds = participant_folds(&members, 4, 3).unwrap();
        assert_eq!(folds.len(), 4);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        for f in &folds {
            assert!(f.iter().filter(|&&i| i < 4).count() <= 1);
        }
        assert_eq!(folds, participant_folds(&members, 4, 3).unwrap());
    }

    #[test]
    fn singleton_grid_is_returned() {
        let cfg = GbdtConfig { n_trees: 5, max_depth: 2, ..GbdtConfig::catboost_like() };
        let (best, _) = grid_search(std::slice::from_ref(&cfg), &xor_set(0), 4, 0).unwrap();
        assert_eq!(best, cfg);
        assert!(grid_search(&[], &xor_set(0), 4, 0).is_err());
    }

    #[test]
    fn ties_prefer_smaller_models() {
        // every configuration separates this data perfectly
        let mut data = xor_set(1);
        for r in 0..data.len() {
            let v = if data.y[r] == 1 { 5.0 } else { -5.0 };
            let row = data.x.row(r).to_vec();
            data.x = {
                let mut rows: Vec<Vec<f64>> = (0..data.len()).map(|i| data.x.row(i).to_vec()).collect();
                rows[r] = vec![v, row[1]];
                Matrix::from_rows(&rows).unwrap()
            };
        }
        let base = GbdtConfig { min_child_weight: 0.0, ..GbdtConfig::catboost_like() };
        let grid = lattice(&base, &[20, 10], &[3, 2], &[0.3, 0.1]);
        let (best, score) = grid_search(&grid, &data, 4, 0).unwrap();
        assert_eq!(score, 1.0);
        assert_eq!((best.n_trees, best.max_depth, best.learning_rate), (10, 2, 0.1));
    }

    #[test]
    fn planted_interaction_selects_depth_two() {
        let base = GbdtConfig { min_child_weight: 0.0, ..GbdtConfig::catboost_like() };
        let grid = lattice(&base, &[20], &[1, 2], &[0.3]);
        let wins = (0..10)
            .filter(|&seed| grid_search(&grid, &xor_set(seed), 4, seed).unwrap().0.max_depth == 2)
            .count();
        assert!(wins >= 8, "{wins}/10");
    }
}
