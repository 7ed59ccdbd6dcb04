use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal, StudentsT};

use super::{TestMethod, TestResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MwuMethod {
    /// Exact when `n1 * n2 <= 400`, otherwise asymptotic.
    #[default]
    Auto,
    Exact,
    Asymptotic,
}

/// Midranks of the pooled sample, plus the tie-group sizes.
fn midranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let n = pooled.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; n];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && pooled[order[j]] == pooled[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        ties.push(j - i);
        i = j;
    }
    (ranks, ties)
}

/// Exact two-sided p-value of the rank sum of `n1` items drawn from the
/// pooled (doubled, hence integral) midranks.
fn exact_pvalue(doubled: &[usize], n1: usize, observed: usize) -> f64 {
    let total: usize = doubled.iter().sum();
    // ways[k][s]: subsets of size k with doubled rank sum s
    let mut ways = vec![vec![0.0f64; total + 1]; n1 + 1];
    ways[0][0] = 1.0;
    for &r in doubled {
        for k in (1..=n1).rev() {
            let (lo, hi) = ways.split_at_mut(k);
            let (prev, cur) = (&lo[k - 1], &mut hi[0]);
            for s in (r..=total).rev() {
                if prev[s - r] != 0.0 {
                    cur[s] += prev[s - r];
                }
            }
        }
    }
    let dist = &ways[n1];
    let all: f64 = dist.iter().sum();
    let lower: f64 = dist[..=observed].iter().sum();
    let upper: f64 = dist[observed..].iter().sum();
    (2.0 * lower.min(upper) / all).min(1.0)
}

/// Two-sided Mann-Whitney U test; the statistic is `min(U1, U2)`.
pub fn mann_whitney_u(x: &[f64], y: &[f64], method: MwuMethod) -> Result<TestResult> {
    let (n1, n2) = (x.len(), y.len());
    if n1 == 0 || n2 == 0 {
        return Err(Error::invalid("Mann-Whitney U needs two non-empty samples"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("Mann-Whitney U sample contains non-finite values"));
    }
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let r1: f64 = ranks[..n1].iter().sum();
    let (f1, f2) = (n1 as f64, n2 as f64);
    let u1 = r1 - f1 * (f1 + 1.0) / 2.0;
    let u = u1.min(f1 * f2 - u1);

    let exact = match method {
        MwuMethod::Exact => true,
        MwuMethod::Asymptotic => false,
        MwuMethod::Auto => n1 * n2 <= 400,
    };
    let p = if exact {
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        exact_pvalue(&doubled, n1, (2.0 * r1).round() as usize)
    } else {
        let n = f1 + f2;
        let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
        let var = f1 * f2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
        if var <= 0.0 {
            1.0
        } else {
            let z = ((f1 * f2 / 2.0 - u) - 0.5).max(0.0) / var.sqrt();
            let norm = Normal::new(0.0, 1.0).expect("unit normal");
            (2.0 * (1.0 - norm.cdf(z))).min(1.0)
        }
    };
    Ok(TestResult {
        statistic: u,
        p_value: p.clamp(0.0, 1.0),
        method: TestMethod::MannWhitneyU,
        n1,
        n2,
        df: None,
    })
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
}

fn t_two_sided(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

/// Independent-samples t-test; Welch unless `equal_var`.
pub fn ttest_independent(x: &[f64], y: &[f64], equal_var: bool) -> Result<TestResult> {
    let (n1, n2) = (x.len(), y.len());
    if n1 < 2 || n2 < 2 {
        return Err(Error::invalid("t-test needs at least two values per group"));
    }
    let (m1, v1) = mean_var(x);
    let (m2, v2) = mean_var(y);
    if v1 == 0.0 && v2 == 0.0 {
        return Err(Error::invalid("t-test undefined when both groups have zero variance"));
    }
    let (f1, f2) = (n1 as f64, n2 as f64);
    let (t, df) = if equal_var {
        let df = f1 + f2 - 2.0;
        let pooled = ((f1 - 1.0) * v1 + (f2 - 1.0) * v2) / df;
        ((m1 - m2) / (pooled * (1.0 / f1 + 1.0 / f2)).sqrt(), df)
    } else {
        let (a, b) = (v1 / f1, v2 / f2);
        let df = (a + b).powi(2) / (a * a / (f1 - 1.0) + b * b / (f2 - 1.0));
        ((m1 - m2) / (a + b).sqrt(), df)
    };
    Ok(TestResult {
        statistic: t,
        p_value: t_two_sided(t, df),
        method: TestMethod::TTestInd,
        n1,
        n2,
        df: Some(df),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeveneCenter {
    #[default]
    Mean,
    Median,
}

fn median(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Levene's test for equal variances of two groups.
pub fn levene(x: &[f64], y: &[f64], center: LeveneCenter) -> Result<TestResult> {
    let (n1, n2) = (x.len(), y.len());
    if n1 < 2 || n2 < 2 {
        return Err(Error::invalid("Levene's test needs at least two values per group"));
    }
    let dev = |g: &[f64]| -> Vec<f64> {
        let c = match center {
            LeveneCenter::Mean => g.iter().sum::<f64>() / g.len() as f64,
            LeveneCenter::Median => median(g),
        };
        g.iter().map(|v| (v - c).abs()).collect()
    };
    let (zx, zy) = (dev(x), dev(y));
    let n = (n1 + n2) as f64;
    let (mx, my) = (zx.iter().sum::<f64>() / n1 as f64, zy.iter().sum::<f64>() / n2 as f64);
    let grand = (zx.iter().sum::<f64>() + zy.iter().sum::<f64>()) / n;
    let between = n1 as f64 * (mx - grand).powi(2) + n2 as f64 * (my - grand).powi(2);
    let within: f64 = zx.iter().map(|z| (z - mx).powi(2)).sum::<f64>()
        + zy.iter().map(|z| (z - my).powi(2)).sum::<f64>();
    if within <= 0.0 {
        return Err(Error::invalid("Levene's test undefined for constant absolute deviations"));
    }
    let (d1, d2) = (1.0, n - 2.0);
    let w = (d2 / d1) * between / within;
    let f = FisherSnedecor::new(d1, d2).expect("positive degrees of freedom");
    Ok(TestResult {
        statistic: w,
        p_value: (1.0 - f.cdf(w)).clamp(0.0, 1.0),
        method: TestMethod::LeveneVariance,
        n1,
        n2,
        df: Some(d2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal as NormalDist};

    /// Brute-force oracle: enumerate every labelling of the pooled sample.
    fn enumerate_p(x: &[f64], y: &[f64]) -> f64 {
        let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
        let (ranks, _) = midranks(&pooled);
        let n = pooled.len();
        let obs: f64 = ranks[..x.len()].iter().sum();
        let (mut le, mut ge, mut all) = (0u64, 0u64, 0u64);
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != x.len() {
                continue;
            }
            let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            all += 1;
            le += u64::from(s <= obs + 1e-9);
            ge += u64::from(s >= obs - 1e-9);
        }
        (2.0 * le.min(ge) as f64 / all as f64).min(1.0)
    }

    #[test]
    fn separated_triples() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], MwuMethod::Auto).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 0.1).abs() < 1e-12);
    }

    #[test]
    fn identical_samples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let r = mann_whitney_u(&x, &x, MwuMethod::Auto).unwrap();
        assert_eq!(r.statistic, 8.0);
        assert_eq!(r.p_value, 1.0);
    }

    // reference values from an established statistics library
    #[test]
    fn matches_reference_values() {
        let r = mann_whitney_u(&[1.5, 2.5, 3.1, 7.2, 0.3], &[4.0, 5.0, 6.0, 2.0, 8.8, 9.1], MwuMethod::Exact).unwrap();
        assert_eq!(r.statistic, 6.0);
        assert!((r.p_value - 0.12554112554112554).abs() < 1e-12);
        let r = mann_whitney_u(&[1.0, 2.0, 2.0, 3.0, 5.0], &[2.0, 3.0, 4.0, 4.0, 6.0, 7.0], MwuMethod::Asymptotic).unwrap();
        assert_eq!(r.statistic, 6.5);
        assert!((r.p_value - 0.13862587987892763).abs() < 1e-9);
    }

    #[test]
    fn exact_matches_normal_for_twenty_each() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = NormalDist::new(0.0, 1.0).unwrap();
        for shift in [0.0, 0.3, 0.6, 1.0] {
            let x: Vec<f64> = (0..20).map(|_| d.sample(&mut rng)).collect();
            let y: Vec<f64> = (0..20).map(|_| d.sample(&mut rng) + shift).collect();
            let e = mann_whitney_u(&x, &y, MwuMethod::Exact).unwrap();
            let a = mann_whitney_u(&x, &y, MwuMethod::Asymptotic).unwrap();
            assert!((e.p_value - a.p_value).abs() < 0.02, "{} vs {}", e.p_value, a.p_value);
        }
    }

    #[test]
    fn welch_and_student_reference() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.5];
        let y = [2.0, 4.0, 6.0, 8.0, 9.0, 11.0];
        let w = ttest_independent(&x, &y, false).unwrap();
        assert!((w.statistic + 2.2765957446808516).abs() < 1e-9);
        assert!((w.df.unwrap() - 7.789166365042872).abs() < 1e-9);
        assert!((w.p_value - 0.053210799838844865).abs() < 1e-6);
        let s = ttest_independent(&x, &y, true).unwrap();
        assert!((s.statistic + 2.150250064243159).abs() < 1e-9);
        assert!((s.p_value - 0.06001222553261779).abs() < 1e-6);
        let l = levene(&x, &y, LeveneCenter::Mean).unwrap();
        assert!((l.statistic - 2.755454845583599).abs() < 1e-9);
        assert!((l.p_value - 0.13129421514468653).abs() < 1e-6);
    }

    #[test]
    fn ttest_degenerate_cases() {
        let r = ttest_independent(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], false).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        assert!(ttest_independent(&[1.0, 1.0], &[2.0, 2.0], false).is_err());
        let mut last = 1.0;
        for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
            let p = ttest_independent(&[0.0, eps], &[1.0, 1.0 + eps], false).unwrap().p_value;
            assert!(p < last);
            last = p;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn welch_detects_planted_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let d = NormalDist::new(0.0, 1.0).unwrap();
        let x: Vec<f64> = (0..30).map(|_| d.sample(&mut rng)).collect();
        let y: Vec<f64> = (0..30).map(|_| d.sample(&mut rng) + 1.0).collect();
        assert!(ttest_independent(&x, &y, false).unwrap().p_value < 0.01);
    }

    /// One-way ANOVA F on two groups, written out directly.
    fn anova_f(a: &[f64], b: &[f64]) -> f64 {
        let all: Vec<f64> = a.iter().chain(b).copied().collect();
        let g = all.iter().sum::<f64>() / all.len() as f64;
        let ma = a.iter().sum::<f64>() / a.len() as f64;
        let mb = b.iter().sum::<f64>() / b.len() as f64;
        let ssb = a.len() as f64 * (ma - g).powi(2) + b.len() as f64 * (mb - g).powi(2);
        let ssw: f64 = a.iter().map(|v| (v - ma).powi(2)).sum::<f64>() + b.iter().map(|v| (v - mb).powi(2)).sum::<f64>();
        ssb / (ssw / (all.len() as f64 - 2.0))
    }

    #[test]
    fn median_levene_is_anova_on_deviations() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.5];
        let y = [2.0, 4.0, 6.0, 8.0, 9.0, 11.0];
        let dx: Vec<f64> = x.iter().map(|v| (v - 3.0f64).abs()).collect();
        let dy: Vec<f64> = y.iter().map(|v| (v - 7.0f64).abs()).collect();
        let l = levene(&x, &y, LeveneCenter::Median).unwrap();
        assert!((l.statistic - anova_f(&dx, &dy)).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn exact_matches_enumeration(
            x in proptest::collection::vec(0u8..6, 1..7),
            y in proptest::collection::vec(0u8..6, 1..7),
        ) {
            let x: Vec<f64> = x.into_iter().map(f64::from).collect();
            let y: Vec<f64> = y.into_iter().map(f64::from).collect();
            let r = mann_whitney_u(&x, &y, MwuMethod::Exact).unwrap();
            prop_assert!((r.p_value - enumerate_p(&x, &y)).abs() < 1e-12);
        }

        #[test]
        fn rank_invariant(x in proptest::collection::vec(-5.0f64..5.0, 2..10), y in proptest::collection::vec(-5.0f64..5.0, 2..10)) {
            let f = |v: &f64| v.exp() * 3.0 + 1.0;
            let a = mann_whitney_u(&x, &y, MwuMethod::Exact).unwrap();
            let b = mann_whitney_u(&x.iter().map(f).collect::<Vec<_>>(), &y.iter().map(f).collect::<Vec<_>>(), MwuMethod::Exact).unwrap();
            prop_assert_eq!(a.statistic, b.statistic);
            prop_assert!((a.p_value - b.p_value).abs() < 1e-12);
        }
    }
}
