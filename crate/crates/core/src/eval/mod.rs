//! Measurement: ranking metrics, RMSE, parity statistics and the
//! federated-vs-centralized divergence trace.

pub mod bayes;
pub mod convergence;
pub mod ranking;
pub mod report;

pub use bayes::{
    bayes_correlated_ttest, PosteriorRecord, PosteriorSummary, DEFAULT_RHO, DEFAULT_ROPE,
};
pub use convergence::{divergence_e, ConvergenceTrace, TraceReference, TraceRow};
pub use ranking::{
    diff_percent, ranking_metrics, rmse, top_k, RankingMetrics, Recommender, RmseReport, TopK,
};
pub use report::{MetricValues, MetricsReport, METRIC_NAMES};
