use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{logit, sigmoid, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearConfig {
    pub c: f64,
    pub tolerance: f64,
    pub max_epochs: usize,
    /// Weight of positive samples; `None` uses `max(1, negatives / positives)`.
    pub class_weight_pos: Option<f64>,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            tolerance: 1e-4,
            max_epochs: 5000,
            class_weight_pos: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Column means substituted for missing inputs.
    pub impute: Vec<f64>,
    pub platt_a: f64,
    pub platt_b: f64,
}

impl LinearModel {
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.bias
            + row
                .iter()
                .zip(&self.weights)
                .zip(&self.impute)
                .map(|((&v, w), m)| w * if v.is_nan() { *m } else { v })
                .sum::<f64>()
    }

    pub fn predict_proba(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows())
            .map(|r| sigmoid(self.platt_a * self.decision(x.row(r)) + self.platt_b))
            .collect()
    }
}

/// Weighted Platt scaling: fits `sigmoid(a * f + b)` by Newton's method on
/// the smoothed targets `(N+ + 1) / (N+ + 2)` and `1 / (N- + 2)`.
pub fn platt_fit(scores: &[f64], y: &[u8], w: &[f64]) -> (f64, f64) {
    let pos: f64 = y.iter().zip(w).filter(|(&c, _)| c == 1).map(|(_, &v)| v).sum();
    let neg: f64 = w.iter().sum::<f64>() - pos;
    let (t_pos, t_neg) = ((pos + 1.0) / (pos + 2.0), 1.0 / (neg + 2.0));
    let target: Vec<f64> = y.iter().map(|&c| if c == 1 { t_pos } else { t_neg }).collect();
    let ridge = 1e-6;
    let (mut a, mut b) = (0.0, logit((pos + 1.0) / (pos + neg + 2.0)));
    let loss = |a: f64, b: f64| -> f64 {
        scores
            .iter()
            .zip(&target)
            .zip(w)
            .map(|((&f, &t), &wi)| {
                let z = a * f + b;
                // log(1 + e^z) - t z, stable in both tails
                wi * (z.max(0.0) + (-z.abs()).exp().ln_1p() - t * z)
            })
            .sum::<f64>()
            + 0.5 * ridge * a * a
    };
    let mut current = loss(a, b);
    for _ in 0..100 {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (ridge * a, 0.0, ridge, 0.0, 1e-12);
        for ((&f, &t), &wi) in scores.iter().zip(&target).zip(w) {
            let p = sigmoid(a * f + b);
            let d = wi * (p - t);
            let s = wi * p * (1.0 - p);
            ga += d * f;
            gb += d;
            haa += s * f * f;
            hab += s * f;
            hbb += s;
        }
        let det = haa * hbb - hab * hab;
        if !(det.abs() > 1e-300) {
            break;
        }
        let da = (hbb * ga - hab * gb) / det;
        let db = (haa * gb - hab * ga) / det;
        let mut step = 1.0;
        let mut improved = false;
        while step > 1e-10 {
            let (na, nb) = (a - step * da, b - step * db);
            let l = loss(na, nb);
            if l <= current + 1e-12 {
                improved = (current - l) > 1e-12 * current.abs().max(1.0);
                a = na;
                b = nb;
                current = l;
                break;
            }
            step *= 0.5;
        }
        if !improved || (ga.abs() < 1e-10 && gb.abs() < 1e-10) {
            break;
        }
    }
    (a, b)
}

/// L1-loss (hinge) linear SVM trained by dual coordinate descent with an
/// augmented bias column, followed by Platt calibration on training scores.
pub fn train_linear_margin(x: &Matrix, y: &[u8], w: &[f64], cfg: &LinearConfig, seed: u64) -> Result<LinearModel> {
    if !(cfg.c > 0.0 && cfg.tolerance > 0.0 && cfg.max_epochs > 0) {
        return Err(Error::invalid("linear model needs positive C, tolerance and epoch budget"));
    }
    let (n, p) = (x.rows(), x.cols());
    if n == 0 {
        return Err(Error::invalid("cannot train on an empty matrix"));
    }
    if y.len() != n || w.len() != n {
        return Err(Error::invalid("labels and weights must match the row count"));
    }
    if y.iter().all(|&c| c == y[0]) {
        return Err(Error::invalid("training labels contain a single class"));
    }
    let impute: Vec<f64> = (0..p)
        .map(|f| {
            let vals: Vec<f64> = (0..n).map(|r| x.get(r, f)).filter(|v| !v.is_nan()).collect();
            if vals.is_empty() {
                0.0
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        })
        .collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|r| {
            let mut v: Vec<f64> = x.row(r).iter().zip(&impute).map(|(&v, &m)| if v.is_nan() { m } else { v }).collect();
            v.push(1.0);
            v
        })
        .collect();
    let sign: Vec<f64> = y.iter().map(|&c| if c == 1 { 1.0 } else { -1.0 }).collect();
    let upper: Vec<f64> = w.iter().map(|wi| cfg.c * wi).collect();
    let qii: Vec<f64> = rows.iter().map(|r| r.iter().map(|v| v * v).sum()).collect();
    let mut alpha = vec![0.0; n];
    let mut wv = vec![0.0; p + 1];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for _ in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for &i in &order {
            let xi = &rows[i];
            let grad = sign[i] * xi.iter().zip(&wv).map(|(a, b)| a * b).sum::<f64>() - 1.0;
            let pg = if alpha[i] == 0.0 {
                grad.min(0.0)
            } else if alpha[i] == upper[i] {
                grad.max(0.0)
            } else {
                grad
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-12 && qii[i] > 0.0 {
                let old = alpha[i];
                alpha[i] = (old - grad / qii[i]).clamp(0.0, upper[i]);
                let d = (alpha[i] - old) * sign[i];
                for (wj, xj) in wv.iter_mut().zip(xi) {
                    *wj += d * xj;
                }
            }
        }
        if pg_max - pg_min < cfg.tolerance {
            break;
        }
    }

    let bias = wv.pop().unwrap_or(0.0);
    let scores: Vec<f64> = rows
        .iter()
        .map(|r| r[..p].iter().zip(&wv).map(|(a, b)| a * b).sum::<f64>() + bias)
        .collect();
    let spread = scores.iter().fold(0.0f64, |m, s| m.max((s - scores[0]).abs()));
    let (platt_a, platt_b) = if spread < 1e-9 {
        // no usable direction: fall back to the weighted prior
        let pos: f64 = y.iter().zip(w).filter(|(&c, _)| c == 1).map(|(_, &v)| v).sum();
        (0.0, logit(pos / w.iter().sum::<f64>()))
    } else {
        platt_fit(&scores, y, w)
    };
    Ok(LinearModel {
        weights: wv,
        bias,
        impute,
        platt_a,
        platt_b,
    })
}
