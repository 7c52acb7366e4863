use super::folds::{stratified_kfold, FoldPlan};
use super::metrics::{confusion, ConfusionMatrix};
use super::report::MetricsReport;
use super::EvalError;
use crate::class::Class;
use crate::features::FeatureMatrix;
use crate::svm::{ovr_train, KernelSpec, Matrix, Standardizer, SvmError, SvmParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvConfig {
    pub kernel: KernelSpec,
    pub params: SvmParams,
    pub k: usize,
    pub repeats: usize,
    /// Repeat `r` shuffles with `seed + r`.
    pub seed: u64,
}

impl CvConfig {
    /// Five folds, ten repeats, seed 0.
    pub fn new(kernel: KernelSpec) -> Self {
        Self {
            kernel,
            params: SvmParams::default(),
            k: 5,
            repeats: 10,
            seed: 0,
        }
    }

    pub fn repeat_seed(&self, repeat: usize) -> u64 {
        self.seed.wrapping_add(repeat as u64)
    }
}

/// Held-out predictions of one (repeat, fold) model.
#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub repeat: usize,
    pub fold: usize,
    pub test_indices: Vec<usize>,
    pub predictions: Vec<usize>,
    /// Per test sample, the decision value of every class.
    pub scores: Vec<Vec<f64>>,
    pub confusion: ConfusionMatrix,
    /// Standardisation the fold's model was trained with.
    pub scaling: Standardizer,
}

#[derive(Debug, Clone)]
pub struct CvRun {
    pub n_classes: usize,
    pub labels: Vec<usize>,
    pub plans: Vec<FoldPlan>,
    /// Ordered by repeat, then fold.
    pub folds: Vec<FoldOutcome>,
}

impl CvRun {
    pub fn repeat(&self, r: usize) -> &[FoldOutcome] {
        let k = self.plans[r].k;
        &self.folds[r * k..(r + 1) * k]
    }

    /// Sum of the fold matrices of repeat `r`.
    pub fn pooled(&self, r: usize) -> ConfusionMatrix {
        let mut cm = ConfusionMatrix::new(self.n_classes);
        for f in self.repeat(r) {
            cm.merge(&f.confusion);
        }
        cm
    }
}

/// Trains one one-vs-rest model per (repeat, fold) on the out-of-fold rows
/// and scores the held-out fold. Jobs may run in parallel; the output order
/// is fixed.
pub fn cross_validate(x: &Matrix, labels: &[usize], n_classes: usize, cfg: &CvConfig) -> Result<CvRun, EvalError> {
    if x.rows() != labels.len() {
        return Err(EvalError::Length(x.rows(), labels.len()));
    }
    if x.rows() == 0 {
        return Err(EvalError::Config("no samples".into()));
    }
    if cfg.repeats == 0 {
        return Err(EvalError::Config("repeats must be at least 1".into()));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(EvalError::LabelOutOfRange { label, n_classes });
    }
    let plans = (0..cfg.repeats)
        .map(|r| {
            stratified_kfold(labels, cfg.k, cfg.repeat_seed(r)).map(|mut p| {
                p.repeat = r;
                p
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let jobs: Vec<(usize, usize)> = (0..cfg.repeats).flat_map(|r| (0..cfg.k).map(move |f| (r, f))).collect();
    let outcomes = crate::par_map(jobs, |(repeat, fold)| {
        run_fold(x, labels, n_classes, cfg, &plans[repeat], fold).map_err(|source| EvalError::Training {
            repeat,
            fold,
            source,
        })
    });
    Ok(CvRun {
        n_classes,
        labels: labels.to_vec(),
        plans,
        folds: outcomes.into_iter().collect::<Result<_, _>>()?,
    })
}

fn run_fold(
    x: &Matrix,
    labels: &[usize],
    n_classes: usize,
    cfg: &CvConfig,
    plan: &FoldPlan,
    fold: usize,
) -> Result<FoldOutcome, SvmError> {
    let train = plan.train_indices(fold);
    let test = plan.test_indices(fold).to_vec();
    let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let model = ovr_train(&x.select_rows(&train), &train_labels, n_classes, &cfg.kernel, &cfg.params)?;
    let mut predictions = Vec::with_capacity(test.len());
    let mut scores = Vec::with_capacity(test.len());
    for &i in &test {
        let (p, s) = model.predict(x.row(i))?;
        predictions.push(p);
        scores.push(s);
    }
    let truth: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
    let confusion = confusion(&truth, &predictions, n_classes).expect("labels validated");
    Ok(FoldOutcome {
        repeat: plan.repeat,
        fold,
        test_indices: test,
        predictions,
        scores,
        confusion,
        scaling: model.scaling().clone(),
    })
}

/// Repeated stratified cross-validation over a feature matrix labelled with
/// [`Class`] indices.
pub fn run_cv(features: &FeatureMatrix, cfg: &CvConfig) -> Result<MetricsReport, EvalError> {
    let x = Matrix::new(features.n_rows(), features.dim(), features.to_f64())
        .map_err(|e| EvalError::Config(e.to_string()))?;
    let run = cross_validate(&x, features.labels(), Class::COUNT, cfg)?;
    MetricsReport::from_run(&run, cfg)
}
