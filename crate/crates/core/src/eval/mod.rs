//! Evaluation protocols: multi-step prediction log-likelihood against an
//! empirical-marginal baseline, and bootstrapped KL divergence of n-gram and
//! lagged-pair statistics.

mod predict;
mod report;
mod stats;

pub use predict::{
    empirical_marginal, next_step_loglik, prediction_loglik, vmm_predictive_distribution,
    smoothed_marginal, MarginalPredictor, PathPredictor, PredictionConfig, PredictionCurve, PredictionReport,
    Predictor, RbmPredictor,
};
pub use report::ReportHeader;
pub use stats::{
    bootstrap_kl, default_epsilon, kl_divergence, ngram_counts, ngram_frequencies,
    paper_statistics, train_vs_test_reference, EventCounts, EventDistribution, KlReport, KlRow,
    StatisticSpec,
};
