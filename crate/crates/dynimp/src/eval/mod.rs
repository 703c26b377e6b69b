//! Downstream classifier, balanced accuracy, imputation RMSE, and the
//! multi-seed experiment matrix.

mod classifier;
mod experiment;
mod metrics;

pub use classifier::{
    pooled_features, predict, train_classifier, ClassifierHyper, ClassifierModel,
};
pub use experiment::{
    run_experiment, write_aggregate_csv, write_results_csv, write_variant_csv, AggregateResult,
    ExperimentConfig, ExperimentResult, Method,
};
pub use metrics::{balanced_accuracy, imputation_rmse};
