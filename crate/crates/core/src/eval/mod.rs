//! Rating aggregation, rank correlation and overlap diagnostics.

pub mod overlap;
pub mod ratings;
pub mod stats;

pub use overlap::{mpg_score, ngram_overlap, MetricConfig};
pub use ratings::{
    dimension_correlations, filter_workers, mean_scores, Comparison, Dimension, EvalItem, FilterConfig, GroupKey,
    RatingRecord, System, TestKeys,
};
pub use stats::{permutation_test, spearman};
