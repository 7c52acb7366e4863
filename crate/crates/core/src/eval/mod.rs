//! Stratified repeated k-fold evaluation: fold plans, confusion matrices,
//! per-class SEN/SPE/ACC, ROC curves and the report that aggregates them.

mod cv;
mod folds;
mod metrics;
mod report;
mod roc;

use thiserror::Error;

use crate::svm::SvmError;

pub use cv::{cross_validate, run_cv, CvConfig, CvRun, FoldOutcome};
pub use folds::{stratified_kfold, FoldPlan};
pub use metrics::{class_metrics, confusion, ClassMetrics, ConfusionMatrix};
pub use report::{class_names, MetricSummary, MetricsReport, RepeatReport, ReportConfig};
pub use roc::{auc, roc_curve};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("k must be at least 2, got {0}")]
    TooFewFolds(usize),
    #[error("class {class} has {count} samples, fewer than k = {k}")]
    ClassTooSmall { class: usize, count: usize, k: usize },
    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error("ROC needs at least one positive and one negative sample")]
    SingleClass,
    #[error("score {0} is not finite")]
    NonFiniteScore(f64),
    #[error("invalid evaluation setup: {0}")]
    Config(String),
    #[error("repeat {repeat}, fold {fold}: {source}")]
    Training {
        repeat: usize,
        fold: usize,
        #[source]
        source: SvmError,
    },
}
