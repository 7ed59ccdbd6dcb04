//! Gradient-boosted trees and a calibrated linear max-margin classifier.

mod gbdt;
mod linear;
mod matrix;
mod model;
mod search;

pub use gbdt::{train_gbdt, GbdtConfig, GbdtModel, TreeNode};
pub use linear::{platt_fit, train_linear_margin, LinearConfig, LinearModel};
pub use matrix::{Matrix, TrainingSet};
pub use model::{
    auto_pos_weight, feature_importance, LearnerSpec, ModelKind, ModelParams, TrainedModel,
    MODEL_FORMAT_VERSION,
};
pub(crate) use search::group_labels;
pub use search::{grid_search, lattice, oof_scores, participant_folds, OofScore};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
