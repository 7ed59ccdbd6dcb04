use crate::error::{Error, Result};
use crate::learners::{logit, sigmoid};

const CLAMP: f64 = 1e-6;

/// `sigmoid(mean(logit(p)))` with inputs clamped to `[1e-6, 1 - 1e-6]`.
pub fn logit_mean_pool(probs: &[f64]) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::data("cannot pool an empty set of window probabilities"));
    }
    if probs.iter().any(|p| p.is_nan()) {
        return Err(Error::data("window probability is NaN"));
    }
    let mean = probs
        .iter()
        .map(|p| logit(p.clamp(CLAMP, 1.0 - CLAMP)))
        .sum::<f64>()
        / probs.len() as f64;
    Ok(sigmoid(mean))
}

/// Balanced accuracy of `p >= tau` against `y`; classes absent from `y`
/// are left out of the average.
pub fn balanced_accuracy_at(scores: &[(f64, u8)], tau: f64) -> f64 {
    let mut hit = [0usize; 2];
    let mut tot = [0usize; 2];
    for &(p, y) in scores {
        let c = usize::from(y);
        tot[c] += 1;
        hit[c] += usize::from(u8::from(p >= tau) == y);
    }
    let recalls: Vec<f64> = (0..2)
        .filter(|&c| tot[c] > 0)
        .map(|c| hit[c] as f64 / tot[c] as f64)
        .collect();
    if recalls.is_empty() {
        0.0
    } else {
        recalls.iter().sum::<f64>() / recalls.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub tau: f64,
    /// Balanced accuracy reached on the calibration scores.
    pub bacc: f64,
    /// False when the scores held a single class and `tau` defaulted to 0.5.
    pub calibrated: bool,
}

/// Threshold maximising balanced accuracy over the midpoints of consecutive
/// distinct scores plus 0.5; ties go to the candidate nearest 0.5.
pub fn calibrate_threshold(scores: &[(f64, u8)]) -> Threshold {
    let has = |c: u8| scores.iter().any(|s| s.1 == c);
    if !(has(0) && has(1)) {
        return Threshold {
            tau: 0.5,
            bacc: balanced_accuracy_at(scores, 0.5),
            calibrated: false,
        };
    }
    let mut ps: Vec<f64> = scores.iter().map(|s| s.0).collect();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    let mut candidates: Vec<f64> = ps.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    candidates.push(0.5);
    let mut best = Threshold {
        tau: 0.5,
        bacc: f64::NEG_INFINITY,
        calibrated: true,
    };
    for tau in candidates {
        let bacc = balanced_accuracy_at(scores, tau);
        let better = bacc > best.bacc + 1e-12
            || ((bacc - best.bacc).abs() <= 1e-12 && (tau - 0.5).abs() < (best.tau - 0.5).abs());
        if better {
            best.tau = tau;
            best.bacc = bacc;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pooling_examples() {
        assert!((logit_mean_pool(&[0.5; 4]).unwrap() - 0.5).abs() < 1e-12);
        assert!((logit_mean_pool(&[0.9, 0.1]).unwrap() - 0.5).abs() < 1e-12);
        assert!((logit_mean_pool(&[0.9, 0.9, 0.9]).unwrap() - 0.9).abs() < 1e-12);
        assert!(logit_mean_pool(&[]).is_err());
        assert!((logit_mean_pool(&[0.0, 1.0]).unwrap() - 0.5).abs() < 1e-9);
        assert!((logit_mean_pool(&[0.0]).unwrap() - 1e-6).abs() < 1e-15);
    }

    #[test]
    fn separated_scores() {
        let s = [(0.1, 0), (0.2, 0), (0.25, 0), (0.7, 1), (0.8, 1)];
        let t = calibrate_threshold(&s);
        assert_eq!((t.tau, t.bacc), (0.5, 1.0));
        let s = [(0.1, 0), (0.2, 0), (0.3, 1), (0.4, 1)];
        let t = calibrate_threshold(&s);
        assert_eq!(t.bacc, 1.0);
        assert!((t.tau - 0.25).abs() < 1e-12);
        assert!(s.iter().all(|&(p, y)| u8::from(p >= t.tau) == y));
    }

    #[test]
    fn identical_scores() {
        let t = calibrate_threshold(&[(0.3, 0), (0.3, 1), (0.3, 0), (0.3, 1)]);
        assert_eq!(t.tau, 0.5);
        assert_eq!(t.bacc, 0.5);
    }

    #[test]
    fn single_class_defaults() {
        let t = calibrate_threshold(&[(0.3, 1), (0.9, 1)]);
        assert_eq!(t.tau, 0.5);
        assert!(!t.calibrated);
    }

    proptest! {
        #[test]
        fn calibrated_matches_exhaustive_sweep(
            scores in proptest::collection::vec((0.0f64..1.0, 0u8..2), 2..40)
        ) {
            prop_assume!(scores.iter().any(|s| s.1 == 0) && scores.iter().any(|s| s.1 == 1));
            let t = calibrate_threshold(&scores);
            // oracle: every score and a fine grid, restricted to cuts that
            // split the scores, plus 0.5
            let lo = scores.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
            let mut grid: Vec<f64> = (0..=2000).map(|i| i as f64 / 2000.0).collect();
            grid.extend(scores.iter().map(|s| s.0));
            let hi = scores.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
            grid.retain(|&g| g > lo && g <= hi);
            grid.push(0.5);
            let best = grid.iter().map(|&g| balanced_accuracy_at(&scores, g)).fold(0.0, f64::max);
            prop_assert!((t.bacc - best).abs() < 1e-12);
            prop_assert!(t.bacc + 1e-12 >= balanced_accuracy_at(&scores, 0.5));
        }
    }
}
