//! Statistics over session logs: accuracy, ROC, mutual information, exact
//! rank tests, t-tests and block-wise learning curves.

mod info;
mod learning;
mod report;
mod stats;
mod wilcoxon;

use thiserror::Error;

pub use info::{mi_bias, mutual_information, roc_auc, JointCounts, RocPoint};
pub use learning::{
    block_vectors, paternoster_z, pearson_r, regression_beta, role_decision, sender_ids,
    trend_fit, DecisionVector, ExclusionMask, SlopeDifference, TrendFit, VectorRole, BLOCK_LEN,
};
pub use report::{
    accuracy, report, report_table, AccuracySummary, AnalysisReport, AucSummary, BlockRow,
    ChanceTests, GroupComparison, LearningSummary, MiSummary, TrendComparison, TriadRow,
    REPORT_SCHEMA, REPORT_VERSION,
};
pub use stats::{
    angular_transform, binomial_test, normal_p, t_test_one_sample, t_test_paired,
    t_test_two_sample, Alternative, TTest,
};
pub use wilcoxon::{wilcoxon_rank_sum, wilcoxon_signed_rank, RankTest, EXACT_MAX_N};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("no input")]
    Empty,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("log error: {0}")]
    Log(String),
}
