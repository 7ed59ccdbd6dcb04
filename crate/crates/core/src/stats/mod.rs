//! Normalisation, hypothesis tests and statistical feature filtering.

mod compare;
mod filter;
mod normality;
mod zscore;

pub use compare::{levene, mann_whitney_u, ttest_independent, LeveneCenter, MwuMethod};
pub use filter::{
    participant_means, statistical_filter, write_qq_csv, write_stats_csv, Direction, FeatureReport,
};
pub(crate) use filter::write_file;
pub use normality::{qq_points, shapiro_wilk};
pub use zscore::{zscore_dataset, zscore_within_subject};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    ShapiroWilk,
    MannWhitneyU,
    TTestInd,
    LeveneVariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: TestMethod,
    pub n1: usize,
    /// Zero for one-sample tests.
    pub n2: usize,
    /// Degrees of freedom where the reference distribution has them.
    pub df: Option<f64>,
}
