//! Cross-validation protocols, hyperparameter search and diagnosis metrics.
//!
//! Fold partitions are plain shuffled splits unless stratification is
//! requested. Standard deviations over folds use the n − 1 denominator.
//! Each fold's training run draws from its own child generator, so folds can
//! run in parallel without changing results.

mod cv;
mod folds;
mod grid;
mod metrics;

pub use cv::{
    cross_validate, evaluate, make_plan, mean, nested_cross_validate, nested_search,
    representative_fold,
    sample_std, Classifier, CvOptions, CvOutcome, CvReport, FoldReport, InnerScore, Trainer,
    TrainerFactory,
};
pub use folds::{shuffled_fold_indices, stratified_fold_indices, FoldPlan};
pub use grid::{GridAxis, HyperparamGrid, ParamSet, ParamValue};
pub use metrics::{confusion, diagnosis_metrics, ConfusionMatrix, DiagnosisMetrics};
