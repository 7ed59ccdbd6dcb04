use serde::{Deserialize, Serialize};

/// Subject-level confusion counts, class 1 = Win.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tp: usize,
}

impl ConfusionMatrix {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u8, u8)>) -> Self {
        let mut cm = ConfusionMatrix::default();
        for (truth, pred) in pairs {
            cm.add(truth, pred);
        }
        cm
    }

    pub fn add(&mut self, truth: u8, pred: u8) {
        match (truth, pred) {
            (0, 0) => self.tn += 1,
            (0, _) => self.fp += 1,
            (_, 0) => self.fn_ += 1,
            _ => self.tp += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tn + self.fp + self.fn_ + self.tp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub bacc: f64,
    pub macro_pr: f64,
    pub macro_re: f64,
    pub macro_f1: f64,
    pub mcc: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(pr: f64, re: f64) -> f64 {
    if pr + re == 0.0 {
        0.0
    } else {
        2.0 * pr * re / (pr + re)
    }
}

/// Balanced accuracy, macro precision/recall/F1 and MCC. Undefined ratios
/// count as 0.
pub fn compute_metrics(cm: &ConfusionMatrix) -> Metrics {
    let ConfusionMatrix { tn, fp, fn_, tp } = *cm;
    let re1 = ratio(tp, tp + fn_);
    let re0 = ratio(tn, tn + fp);
    let pr1 = ratio(tp, tp + fp);
    let pr0 = ratio(tn, tn + fn_);
    let factors = [tp + fp, tp + fn_, tn + fp, tn + fn_];
    let mcc = if factors.contains(&0) {
        0.0
    } else {
        let num = tp as f64 * tn as f64 - fp as f64 * fn_ as f64;
        num / factors.iter().map(|&f| f as f64).product::<f64>().sqrt()
    };
    Metrics {
        bacc: (re0 + re1) / 2.0,
        macro_pr: (pr0 + pr1) / 2.0,
        macro_re: (re0 + re1) / 2.0,
        macro_f1: (f1(pr0, re0) + f1(pr1, re1)) / 2.0,
        mcc,
    }
}
