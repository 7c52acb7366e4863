use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::cv::{CvConfig, CvRun};
use super::metrics::{class_metrics, ClassMetrics, ConfusionMatrix};
use super::roc::{auc, roc_curve};
use super::EvalError;
use crate::class::Class;
use crate::svm::KernelSpec;

/// Names used as report keys: the dataset classes for three-class runs,
/// `class{k}` otherwise.
pub fn class_names(n_classes: usize) -> Vec<String> {
    if n_classes == Class::COUNT {
        Class::ALL.iter().map(|c| c.name().to_string()).collect()
    } else {
        (0..n_classes).map(|k| format!("class{k}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub kernel: KernelSpec,
    pub kernel_name: String,
    pub c: f64,
    pub tol: f64,
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
    pub n_samples: usize,
    /// Class names in index order.
    pub classes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub sen: f64,
    pub spe: f64,
    pub acc: f64,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatReport {
    pub repeat: usize,
    pub seed: u64,
    pub fold_confusion: Vec<ConfusionMatrix>,
    pub pooled_confusion: ConfusionMatrix,
    pub per_class: BTreeMap<String, ClassMetrics>,
    /// From this repeat's out-of-fold decision values.
    pub auc: BTreeMap<String, f64>,
}

/// Result of one repeated cross-validation run.
///
/// `mean` and `std` (sample standard deviation) are taken over the
/// per-repeat pooled metrics. `roc` and `auc` use the out-of-fold decision
/// values of all repeats together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config: ReportConfig,
    pub per_repeat: Vec<RepeatReport>,
    pub mean: BTreeMap<String, MetricSummary>,
    pub std: BTreeMap<String, MetricSummary>,
    pub roc: BTreeMap<String, Vec<[f64; 2]>>,
    pub auc: BTreeMap<String, f64>,
}

fn class_roc(scored: &[(f64, bool)]) -> Result<Vec<(f64, f64)>, EvalError> {
    let (s, p): (Vec<f64>, Vec<bool>) = scored.iter().copied().unzip();
    roc_curve(&s, &p)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Summation rounding can land a hair outside the sample range.
    let mean = mean.clamp(lo, hi);
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, std)
}

impl MetricsReport {
    pub fn from_run(run: &CvRun, cfg: &CvConfig) -> Result<Self, EvalError> {
        let names = class_names(run.n_classes);
        let mut all_scores: Vec<Vec<(f64, bool)>> = vec![Vec::new(); run.n_classes];
        let mut per_repeat = Vec::with_capacity(run.plans.len());
        for (r, plan) in run.plans.iter().enumerate() {
            let pooled = run.pooled(r);
            let metrics = class_metrics(&pooled);
            let mut scores: Vec<Vec<(f64, bool)>> = vec![Vec::new(); run.n_classes];
            for fold in run.repeat(r) {
                for (&i, s) in fold.test_indices.iter().zip(&fold.scores) {
                    for (k, &v) in s.iter().enumerate() {
                        scores[k].push((v, run.labels[i] == k));
                    }
                }
            }
            let mut aucs = BTreeMap::new();
            for (k, scored) in scores.iter().enumerate() {
                aucs.insert(names[k].clone(), auc(&class_roc(scored)?));
                all_scores[k].extend_from_slice(scored);
            }
            per_repeat.push(RepeatReport {
                repeat: r,
                seed: plan.seed,
                fold_confusion: run.repeat(r).iter().map(|f| f.confusion.clone()).collect(),
                pooled_confusion: pooled,
                per_class: names.iter().cloned().zip(metrics).collect(),
                auc: aucs,
            });
        }

        let mut mean = BTreeMap::new();
        let mut std = BTreeMap::new();
        let mut roc = BTreeMap::new();
        let mut pooled_auc = BTreeMap::new();
        for (k, name) in names.iter().enumerate() {
            let column = |f: &dyn Fn(&RepeatReport) -> f64| mean_std(&per_repeat.iter().map(f).collect::<Vec<_>>());
            let sen = column(&|r| r.per_class[name].sen);
            let spe = column(&|r| r.per_class[name].spe);
            let acc = column(&|r| r.per_class[name].acc);
            let a = column(&|r| r.auc[name]);
            mean.insert(
                name.clone(),
                MetricSummary {
                    sen: sen.0,
                    spe: spe.0,
                    acc: acc.0,
                    auc: a.0,
                },
            );
            std.insert(
                name.clone(),
                MetricSummary {
                    sen: sen.1,
                    spe: spe.1,
                    acc: acc.1,
                    auc: a.1,
                },
            );
            let points = class_roc(&all_scores[k])?;
            pooled_auc.insert(name.clone(), auc(&points));
            roc.insert(name.clone(), points.into_iter().map(|(x, y)| [x, y]).collect());
        }

        Ok(MetricsReport {
            config: ReportConfig {
                kernel: cfg.kernel,
                kernel_name: cfg.kernel.name().to_string(),
                c: cfg.params.c,
                tol: cfg.params.tol,
                k: cfg.k,
                repeats: cfg.repeats,
                seed: cfg.seed,
                n_samples: run.labels.len(),
                classes: names,
            },
            per_repeat,
            mean,
            std,
            roc,
            auc: pooled_auc,
        })
    }

    /// Per-repeat pooled matrices: `repeat,true_class,<predicted...>`.
    pub fn confusion_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["repeat".to_string(), "true_class".to_string()];
        header.extend(self.config.classes.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for rep in &self.per_repeat {
            for (name, row) in self.config.classes.iter().zip(rep.pooled_confusion.rows()) {
                let mut rec = vec![rep.repeat.to_string(), name.clone()];
                rec.extend(row.iter().map(u64::to_string));
                w.write_record(&rec).expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    /// Pooled ROC points: `class,fpr,tpr`.
    pub fn roc_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["class", "fpr", "tpr"]).expect("in-memory write");
        for name in &self.config.classes {
            for [x, y] in &self.roc[name] {
                w.write_record([name.clone(), x.to_string(), y.to_string()])
                    .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}
