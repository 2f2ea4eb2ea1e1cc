//! Time-ordered splitting protocols, classification metrics and grid search.

mod grid;
mod metrics;
mod splits;

pub use grid::{grid_search, select, Candidate, Evaluation, GridResult, GridRow, Policy};
pub use metrics::{compute_metrics, ClassMetrics, MetricReport};
pub use splits::{
    fold_sizes, rounds10_wrap_splits, rounds12_splits, time_kfold_splits, Protocol, Split, SplitPlan,
};
