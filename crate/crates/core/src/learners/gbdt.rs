use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{logit, sigmoid, Matrix};
use crate::error::{Error, Result};

/// Boosting hyperparameters (`model.*` config keys).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GbdtConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub l2_leaf_reg: f64,
    pub min_child_weight: f64,
    pub subsample: f64,
    pub colsample: f64,
    /// Minimum split gain.
    pub gamma: f64,
    /// Weight of positive samples; `None` uses `max(1, negatives / positives)`.
    pub class_weight_pos: Option<f64>,
    /// Quantile bins per feature for split candidates; `None` tries every
    /// distinct value.
    pub max_bins: Option<usize>,
}

impl GbdtConfig {
    pub fn catboost_like() -> Self {
        Self {
            n_trees: 600,
            max_depth: 6,
            learning_rate: 0.05,
            l2_leaf_reg: 3.0,
            min_child_weight: 1.0,
            subsample: 1.0,
            colsample: 1.0,
            gamma: 0.0,
            class_weight_pos: None,
            max_bins: None,
        }
    }

    pub fn xgboost_like() -> Self {
        Self {
            n_trees: 400,
            max_depth: 5,
            learning_rate: 0.05,
            l2_leaf_reg: 1.5,
            min_child_weight: 5.0,
            subsample: 0.8,
            colsample: 0.8,
            gamma: 0.2,
            class_weight_pos: None,
            max_bins: None,
        }
    }

    pub fn fusion_meta() -> Self {
        Self {
            n_trees: 10,
            max_depth: 2,
            learning_rate: 0.08,
            l2_leaf_reg: 1.0,
            min_child_weight: 1.0,
            subsample: 1.0,
            colsample: 1.0,
            gamma: 0.0,
            class_weight_pos: None,
            max_bins: None,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "catboost-like" => Ok(Self::catboost_like()),
            "xgboost-like" => Ok(Self::xgboost_like()),
            "fusion-meta" => Ok(Self::fusion_meta()),
            other => Err(Error::invalid(format!("unknown model preset {other:?}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.n_trees >= 1
            && self.max_depth >= 1
            && self.learning_rate > 0.0
            && self.learning_rate <= 1.0
            && self.l2_leaf_reg >= 0.0
            && self.min_child_weight >= 0.0
            && self.subsample > 0.0
            && self.subsample <= 1.0
            && self.colsample > 0.0
            && self.colsample <= 1.0
            && self.gamma >= 0.0
            && self.class_weight_pos.is_none_or(|w| w > 0.0)
            && self.max_bins.is_none_or(|b| b >= 2);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid boosting configuration {self:?}")))
        }
    }
}

impl Default for GbdtConfig {
    fn default() -> Self {
        Self::catboost_like()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum TreeNode {
    Split {
        feature: usize,
        /// Rows with `x <= threshold` go left.
        threshold: f64,
        /// Side taken by missing values.
        default_left: bool,
        gain: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        value: f64,
    },
}

impl TreeNode {
    pub fn eval(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split { feature, threshold, default_left, left, right, .. } => {
                    let v = row[*feature];
                    let go_left = if v.is_nan() { *default_left } else { v <= *threshold };
                    node = if go_left { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub base_margin: f64,
    pub trees: Vec<TreeNode>,
    /// Total split gain per feature column.
    pub gain: Vec<f64>,
}

impl GbdtModel {
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.base_margin + self.trees.iter().map(|t| t.eval(row)).sum::<f64>()
    }

    pub fn predict_proba(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows()).map(|r| sigmoid(self.margin(x.row(r)))).collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    default_left: bool,
    gain: f64,
    gl: f64,
    hl: f64,
}

enum Building {
    Open,
    Leaf(f64),
    Split { c: Candidate, left: usize, right: usize },
}

const NONE: u32 = u32::MAX;

struct Trainer<'a> {
    cfg: &'a GbdtConfig,
    cols: Vec<Vec<f64>>,
    sorted: Vec<Vec<u32>>,
}

impl Trainer<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        let d = h + self.cfg.l2_leaf_reg;
        if d > 0.0 {
            g * g / d
        } else {
            0.0
        }
    }

    fn leaf(&self, g: f64, h: f64) -> f64 {
        let d = h + self.cfg.l2_leaf_reg;
        if d > 0.0 {
            -g / d * self.cfg.learning_rate
        } else {
            0.0
        }
    }

    fn build(&self, g: &[f64], h: &[f64], in_sample: &[bool], features: &[usize], gain_acc: &mut [f64]) -> TreeNode {
        let n = g.len();
        let mut slot: Vec<u32> = (0..n).map(|r| if in_sample[r] { 0 } else { NONE }).collect();
        let mut arena: Vec<Building> = vec![Building::Open];
        // per open slot: (arena index, G, H, count)
        let (mut g0, mut h0, mut c0) = (0.0, 0.0, 0usize);
        for r in 0..n {
            if in_sample[r] {
                g0 += g[r];
                h0 += h[r];
                c0 += 1;
            }
        }
        let mut open: Vec<(usize, f64, f64, usize)> = vec![(0, g0, h0, c0)];
        let mcw = self.cfg.min_child_weight;

        for depth in 0..=self.cfg.max_depth {
            if open.is_empty() {
                break;
            }
            let m = open.len();
            let mut best: Vec<Option<Candidate>> = vec![None; m];
            if depth < self.cfg.max_depth {
                let mut tot_g = vec![0.0; m];
                let mut tot_h = vec![0.0; m];
                let mut tot_c = vec![0usize; m];
                let mut gl = vec![0.0; m];
                let mut hl = vec![0.0; m];
                let mut cl = vec![0usize; m];
                let mut last = vec![f64::NAN; m];
                for &f in features {
                    let col = &self.cols[f];
                    let order = &self.sorted[f];
                    tot_g.fill(0.0);
                    tot_h.fill(0.0);
                    tot_c.fill(0);
                    for &r in order {
                        let s = slot[r as usize];
                        if s != NONE {
                            let s = s as usize;
                            tot_g[s] += g[r as usize];
                            tot_h[s] += h[r as usize];
                            tot_c[s] += 1;
                        }
                    }
                    gl.fill(0.0);
                    hl.fill(0.0);
                    cl.fill(0);
                    for &r in order {
                        let s = slot[r as usize];
                        if s == NONE {
                            continue;
                        }
                        let s = s as usize;
                        let r = r as usize;
                        let v = col[r];
                        if cl[s] > 0 && v > last[s] {
                            let (_, gn, hn, cn) = open[s];
                            let parent = self.score(gn, hn);
                            let miss_c = cn - tot_c[s];
                            let (mg, mh) = (gn - tot_g[s], hn - tot_h[s]);
                            let mut consider = |gl_: f64, hl_: f64, cl_: usize, default_left: bool| {
                                let (gr, hr, cr) = (gn - gl_, hn - hl_, cn - cl_);
                                if cr == 0 || hl_ < mcw || hr < mcw {
                                    return;
                                }
                                let gain = 0.5 * (self.score(gl_, hl_) + self.score(gr, hr) - parent) - self.cfg.gamma;
                                if gain > 1e-12 && best[s].is_none_or(|b| gain > b.gain) {
                                    best[s] = Some(Candidate {
                                        feature: f,
                                        threshold: last[s],
                                        default_left,
                                        gain,
                                        gl: gl_,
                                        hl: hl_,
                                    });
                                }
                            };
                            if miss_c == 0 {
                                consider(gl[s], hl[s], cl[s], hl[s] >= hn - hl[s]);
                            } else {
                                consider(gl[s], hl[s], cl[s], false);
                                consider(gl[s] + mg, hl[s] + mh, cl[s] + miss_c, true);
                            }
                        }
                        gl[s] += g[r];
                        hl[s] += h[r];
                        cl[s] += 1;
                        last[s] = v;
                    }
                    // observed values left, missing values right
                    for s in 0..m {
                        let (_, gn, hn, cn) = open[s];
                        let (gr, hr) = (gn - tot_g[s], hn - tot_h[s]);
                        if tot_c[s] == 0 || tot_c[s] == cn || tot_h[s] < mcw || hr < mcw {
                            continue;
                        }
                        let gain = 0.5 * (self.score(tot_g[s], tot_h[s]) + self.score(gr, hr) - self.score(gn, hn))
                            - self.cfg.gamma;
                        if gain > 1e-12 && best[s].is_none_or(|b| gain > b.gain) {
                            best[s] = Some(Candidate {
                                feature: f,
                                threshold: last[s],
                                default_left: false,
                                gain,
                                gl: tot_g[s],
                                hl: tot_h[s],
                            });
                        }
                    }
                }
            }

            // turn the level into leaves or splits
            let mut next_open = Vec::new();
            let mut child_slot: Vec<Option<(u32, u32)>> = vec![None; m];
            for (s, &(idx, gn, hn, _)) in open.iter().enumerate() {
                match best[s] {
                    Some(c) => {
                        gain_acc[c.feature] += c.gain;
                        let (li, ri) = (arena.len(), arena.len() + 1);
                        arena.push(Building::Open);
                        arena.push(Building::Open);
                        arena[idx] = Building::Split { c, left: li, right: ri };
                        let ls = next_open.len() as u32;
                        next_open.push((li, c.gl, c.hl, 0usize));
                        next_open.push((ri, gn - c.gl, hn - c.hl, 0usize));
                        child_slot[s] = Some((ls, ls + 1));
                    }
                    None => arena[idx] = Building::Leaf(self.leaf(gn, hn)),
                }
            }
            for r in 0..n {
                let s = slot[r];
                if s == NONE {
                    continue;
                }
                slot[r] = match (child_slot[s as usize], best[s as usize]) {
                    (Some((ls, rs)), Some(c)) => {
                        let v = self.cols[c.feature][r];
                        let left = if v.is_nan() { c.default_left } else { v <= c.threshold };
                        let ns = if left { ls } else { rs };
                        next_open[ns as usize].3 += 1;
                        ns
                    }
                    _ => NONE,
                };
            }
            open = next_open;
        }
        for (idx, gn, hn, _) in open {
            arena[idx] = Building::Leaf(self.leaf(gn, hn));
        }
        to_tree(&arena, 0)
    }
}

fn to_tree(arena: &[Building], i: usize) -> TreeNode {
    match &arena[i] {
        Building::Leaf(v) => TreeNode::Leaf { value: *v },
        Building::Split { c, left, right } => TreeNode::Split {
            feature: c.feature,
            threshold: c.threshold,
            default_left: c.default_left,
            gain: c.gain,
            left: Box::new(to_tree(arena, *left)),
            right: Box::new(to_tree(arena, *right)),
        },
        Building::Open => TreeNode::Leaf { value: 0.0 },
    }
}

/// Snaps every value up to the nearest of at most `bins - 1` quantile cuts
/// (values above the last cut go to the column maximum). Splits found on the
/// snapped column send the same rows left as the raw value would.
fn quantize(col: Vec<f64>, bins: usize) -> Vec<f64> {
    let mut sorted: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan()).collect();
    if sorted.is_empty() {
        return col;
    }
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut cuts: Vec<f64> = (1..bins).map(|k| sorted[(k * n / bins).min(n - 1)]).collect();
    cuts.push(sorted[n - 1]);
    cuts.dedup();
    col.into_iter()
        .map(|v| if v.is_nan() { v } else { cuts[cuts.partition_point(|&c| c < v)] })
        .collect()
}

/// Gradient-boosted trees on the weighted logistic loss with exact greedy
/// splits and learned default directions for missing values.
pub fn train_gbdt(x: &Matrix, y: &[u8], w: &[f64], cfg: &GbdtConfig, seed: u64) -> Result<GbdtModel> {
    cfg.validate()?;
    let (n, p) = (x.rows(), x.cols());
    if n == 0 || p == 0 {
        return Err(Error::invalid("cannot train on an empty matrix"));
    }
    if y.len() != n || w.len() != n {
        return Err(Error::invalid("labels and weights must match the row count"));
    }
    if w.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::invalid("sample weights must be positive"));
    }
    let pos: f64 = y.iter().zip(w).filter(|(&c, _)| c == 1).map(|(_, &v)| v).sum();
    let total: f64 = w.iter().sum();
    if pos == 0.0 || pos == total {
        return Err(Error::invalid("training labels contain a single class"));
    }

    let cols: Vec<Vec<f64>> = (0..p)
        .map(|f| {
            let col: Vec<f64> = (0..n).map(|r| x.get(r, f)).collect();
            match cfg.max_bins {
                Some(b) => quantize(col, b),
                None => col,
            }
        })
        .collect();
    let sorted = cols
        .iter()
        .map(|c| {
            let mut idx: Vec<u32> = (0..n as u32).filter(|&r| !c[r as usize].is_nan()).collect();
            idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]));
            idx
        })
        .collect();
    let trainer = Trainer { cfg, cols, sorted };

    let base_margin = logit(pos / total);
    let mut margin = vec![base_margin; n];
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut gain = vec![0.0; p];
    let mut trees = Vec::with_capacity(cfg.n_trees);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_feat = ((cfg.colsample * p as f64).round() as usize).clamp(1, p);
    let mut in_sample = vec![true; n];
    let mut row = vec![0.0; p];

    for _ in 0..cfg.n_trees {
        for r in 0..n {
            let prob = sigmoid(margin[r]);
            g[r] = w[r] * (prob - f64::from(y[r]));
            h[r] = w[r] * prob * (1.0 - prob);
        }
        if cfg.subsample < 1.0 {
            for s in in_sample.iter_mut() {
                *s = rng.gen::<f64>() < cfg.subsample;
            }
        }
        let mut features: Vec<usize> = if n_feat < p {
            sample(&mut rng, p, n_feat).into_vec()
        } else {
            (0..p).collect()
        };
        features.sort_unstable();
        let tree = trainer.build(&g, &h, &in_sample, &features, &mut gain);
        for r in 0..n {
            for (f, v) in row.iter_mut().enumerate() {
                *v = trainer.cols[f][r];
            }
            margin[r] += tree.eval(&row);
        }
        trees.push(tree);
    }
    Ok(GbdtModel { base_margin, trees, gain })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn cfg(trees: usize, depth: usize) -> GbdtConfig {
        GbdtConfig {
            n_trees: trees,
            max_depth: depth,
            learning_rate: 0.3,
            l2_leaf_reg: 1.0,
            min_child_weight: 0.0,
            ..GbdtConfig::catboost_like()
        }
    }

    fn accuracy(m: &GbdtModel, x: &Matrix, y: &[u8]) -> f64 {
        let p = m.predict_proba(x);
        p.iter().zip(y).filter(|(p, &y)| (**p >= 0.5) == (y == 1)).count() as f64 / y.len() as f64
    }

    fn sign_data(n: usize, seed: u64) -> (Matrix, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        let y = xs.iter().map(|&v| u8::from(v > 0.0)).collect();
        (Matrix::new(n, 1, xs).unwrap(), y)
    }

    #[test]
    fn stump_separates_sign() {
        let (x, y) = sign_data(200, 1);
        let m = train_gbdt(&x, &y, &vec![1.0; 200], &cfg(10, 1), 0).unwrap();
        assert_eq!(accuracy(&m, &x, &y), 1.0);
        assert!(m.trees.iter().all(|t| t.depth() <= 1));
    }

    #[test]
    fn stump_cannot_fit_xor() {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..200 {
            let (a, b) = ((i % 2) as f64, ((i / 2) % 2) as f64);
            rows.push(vec![a + 0.01 * (i % 7) as f64, b + 0.01 * (i % 5) as f64]);
            y.push(u8::from((a > 0.5) != (b > 0.5)));
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let m = train_gbdt(&x, &y, &vec![1.0; 200], &cfg(1, 1), 0).unwrap();
        assert!(accuracy(&m, &x, &y) <= 0.75);
    }

    #[test]
    fn single_class_is_rejected() {
        let x = Matrix::new(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(train_gbdt(&x, &[1, 1, 1], &[1.0; 3], &cfg(1, 1), 0).is_err());
        assert!(train_gbdt(&Matrix::new(0, 1, vec![]).unwrap(), &[], &[], &cfg(1, 1), 0).is_err());
    }

    #[test]
    fn zero_trees_balanced_is_half() {
        let m = GbdtModel { base_margin: 0.0, trees: vec![], gain: vec![0.0] };
        let x = Matrix::new(3, 1, vec![-1.0, 0.0, 5.0]).unwrap();
        assert!(m.predict_proba(&x).iter().all(|&p| p == 0.5));
    }

    #[test]
    fn missing_values_follow_learned_direction() {
        // positives have the feature missing
        let mut data = Vec::new();
        let mut y = Vec::new();
        for i in 0..100 {
            if i % 2 == 0 {
                data.push(f64::NAN);
                y.push(1);
            } else {
                data.push(i as f64);
                y.push(0);
            }
        }
        let x = Matrix::new(100, 1, data).unwrap();
        let m = train_gbdt(&x, &y, &vec![1.0; 100], &cfg(5, 1), 0).unwrap();
        assert_eq!(accuracy(&m, &x, &y), 1.0);
    }

    #[test]
    fn monotone_transform_keeps_predictions() {
        let (x, y) = sign_data(150, 3);
        let noisy: Vec<u8> = y.iter().enumerate().map(|(i, &v)| if i % 9 == 0 { 1 - v } else { v }).collect();
        let a = train_gbdt(&x, &noisy, &vec![1.0; 150], &cfg(20, 3), 0).unwrap();
        let tx = x.map(|v| (v * 3.0).exp() + 7.0);
        let b = train_gbdt(&tx, &noisy, &vec![1.0; 150], &cfg(20, 3), 0).unwrap();
        for (p, q) in a.predict_proba(&x).iter().zip(b.predict_proba(&tx)) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn weight_scaling_is_neutral_without_regularisation() {
        let (x, y) = sign_data(120, 4);
        let noisy: Vec<u8> = y.iter().enumerate().map(|(i, &v)| if i % 7 == 0 { 1 - v } else { v }).collect();
        let c = GbdtConfig { l2_leaf_reg: 0.0, gamma: 0.0, min_child_weight: 0.0, ..cfg(15, 2) };
        let w: Vec<f64> = noisy.iter().map(|&v| if v == 1 { 1.5 } else { 1.0 }).collect();
        let w7: Vec<f64> = w.iter().map(|v| v * 7.0).collect();
        let a = train_gbdt(&x, &noisy, &w, &c, 0).unwrap();
        let b = train_gbdt(&x, &noisy, &w7, &c, 0).unwrap();
        for (p, q) in a.predict_proba(&x).iter().zip(b.predict_proba(&x)) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn same_seed_same_model() {
        let (x, y) = sign_data(100, 5);
        let c = GbdtConfig { subsample: 0.7, colsample: 1.0, ..cfg(10, 3) };
        let a = train_gbdt(&x, &y, &vec![1.0; 100], &c, 9).unwrap();
        let b = train_gbdt(&x, &y, &vec![1.0; 100], &c, 9).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn quantize_keeps_order_and_caps_levels() {
        let col: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64).chain([f64::NAN]).collect();
        let q = quantize(col.clone(), 4);
        assert!(q[100].is_nan());
        let mut levels: Vec<f64> = q[..100].to_vec();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        assert!(levels.len() <= 4);
        for i in 0..100 {
            assert!(q[i] >= col[i]);
            for j in 0..100 {
                if col[i] <= col[j] {
                    assert!(q[i] <= q[j]);
                }
            }
        }
    }

    #[test]
    fn binned_stump_still_separates_sign() {
        let (x, y) = sign_data(200, 6);
        let c = GbdtConfig { max_bins: Some(16), ..cfg(10, 1) };
        let m = train_gbdt(&x, &y, &vec![1.0; 200], &c, 0).unwrap();
        assert!(accuracy(&m, &x, &y) >= 0.95);
        assert!(GbdtConfig { max_bins: Some(1), ..cfg(1, 1) }.validate().is_err());
    }
}
