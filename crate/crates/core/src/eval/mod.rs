//! Confusion matrices, support-weighted metrics and significance tests.

mod confusion;
mod metrics;
mod ttest;

pub use confusion::ConfusionMatrix;
pub use metrics::{weighted_metrics, ClassMetrics, MetricReport};
pub use ttest::{compare_experiments, welch_ttest, TTest};
