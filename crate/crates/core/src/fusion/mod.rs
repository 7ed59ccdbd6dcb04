//! Subject-level pooling, thresholds, consensus fusion and LOSO evaluation.

mod ablation;
mod consensus;
mod loso;
mod metrics;
mod pool;

pub use ablation::{
    ablate_consensus, ablate_consensus_with, ablate_ocular, ablate_ocular_with, AblationRow, ConsensusAblation,
    MetricsDelta, OcularAblation, OcularComponent,
};
pub use consensus::{
    consensus_fuse, fuse_available, stacked_fuse, MetaLearner, MetaSample, ScoreModality, ScoreModel, SubjectScore,
};
pub use loso::{
    loso_run, loso_run_with, EvalReport, FoldReport, GridSpec, LeakageGuard, LosoConfig, ModalityResult, Target,
    REPORT_FORMAT_VERSION,
};

pub use metrics::{compute_metrics, ConfusionMatrix, Metrics};
pub use pool::{balanced_accuracy_at, calibrate_threshold, logit_mean_pool, Threshold};
