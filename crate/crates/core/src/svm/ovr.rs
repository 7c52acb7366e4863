use serde::{Deserialize, Serialize};

use super::smo::{self, KernelMatrix};
use super::{dot, KernelSpec, Matrix, Result, Standardizer, SvmError};

pub(crate) const DEFAULT_MAX_ITERATIONS: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    /// Box constraint.
    pub c: f64,
    /// KKT tolerance for SMO.
    pub tol: f64,
    pub max_iterations: usize,
    /// Fit per-feature standardisation on the training rows.
    pub standardize: bool,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-3,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            standardize: true,
        }
    }
}

/// One class-versus-rest decision function.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryModel {
    pub class: usize,
    /// Training-row indices of the support vectors.
    pub sv_indices: Vec<usize>,
    /// `α_i·y_i` for each support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
    // Positions of the support vectors in the model's shared row store.
    pub(crate) slots: Vec<usize>,
}

/// One-vs-rest ensemble with the feature scaling frozen at training time.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedSvmModel {
    pub(crate) kernel: KernelSpec,
    pub(crate) scaling: Standardizer,
    /// Standardised rows of the union of all support vectors.
    pub(crate) support_vectors: Matrix,
    /// Training-row index of each row in `support_vectors`.
    pub(crate) support_rows: Vec<usize>,
    pub(crate) binaries: Vec<BinaryModel>,
}

/// Fits one binary SVM per class (that class +1, the rest −1) on the
/// standardised rows of `x`. Every class in `0..n_classes` must appear.
pub fn ovr_train(
    x: &Matrix,
    labels: &[usize],
    n_classes: usize,
    kernel: &KernelSpec,
    params: &SvmParams,
) -> Result<TrainedSvmModel> {
    if x.rows() != labels.len() {
        return Err(SvmError::Dimension {
            expected: x.rows(),
            got: labels.len(),
        });
    }
    if n_classes < 2 {
        return Err(SvmError::Problem(format!("need at least 2 classes, got {}", n_classes)));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(SvmError::Problem(format!("label {} out of range for {} classes", bad, n_classes)));
    }
    if let Some(absent) = (0..n_classes).find(|k| !labels.contains(k)) {
        return Err(SvmError::ClassAbsent(absent));
    }
    let scaling = if params.standardize {
        Standardizer::fit(x)?
    } else {
        Standardizer::identity(x.cols())
    };
    let z = scaling.apply_matrix(x)?;
    let gram = KernelMatrix::gram(&z);
    let k = KernelMatrix::from_gram(&gram, kernel);
    drop(gram);

    let classes: Vec<usize> = (0..n_classes).collect();
    let solutions = crate::par_map(classes, |class| {
        let y: Vec<f64> = labels.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
        smo::solve(&k, &y, params.c, params.tol, params.max_iterations).map(|s| (class, y, s))
    });

    let mut support_rows: Vec<usize> = Vec::new();
    let mut slot_of = vec![usize::MAX; x.rows()];
    let mut binaries = Vec::with_capacity(n_classes);
    for solution in solutions {
        let (class, y, sol) = solution?;
        let mut model = BinaryModel {
            class,
            sv_indices: Vec::new(),
            coef: Vec::new(),
            bias: sol.bias,
            slots: Vec::new(),
        };
        for (i, &a) in sol.alpha.iter().enumerate() {
            if a > 0.0 {
                if slot_of[i] == usize::MAX {
                    slot_of[i] = support_rows.len();
                    support_rows.push(i);
                }
                model.sv_indices.push(i);
                model.coef.push(a * y[i]);
                model.slots.push(slot_of[i]);
            }
        }
        binaries.push(model);
    }
    Ok(TrainedSvmModel {
        kernel: *kernel,
        scaling,
        support_vectors: z.select_rows(&support_rows),
        support_rows,
        binaries,
    })
}

impl TrainedSvmModel {
    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn scaling(&self) -> &Standardizer {
        &self.scaling
    }

    pub fn n_classes(&self) -> usize {
        self.binaries.len()
    }

    pub fn dim(&self) -> usize {
        self.scaling.dim()
    }

    pub fn binaries(&self) -> &[BinaryModel] {
        &self.binaries
    }

    /// Standardised feature rows of the support vectors, with their
    /// training-row indices.
    pub fn support_vectors(&self) -> (&Matrix, &[usize]) {
        (&self.support_vectors, &self.support_rows)
    }

    fn kernel_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.scaling.apply(x)?;
        Ok((0..self.support_vectors.rows())
            .map(|r| self.kernel.from_dot(dot(self.support_vectors.row(r), &z)))
            .collect())
    }

    fn with_kernel_row(&self, class: usize, krow: &[f64]) -> f64 {
        let m = &self.binaries[class];
        m.slots.iter().zip(&m.coef).map(|(&s, c)| c * krow[s]).sum::<f64>() + m.bias
    }

    /// `f_k(x) = Σ α_i y_i K(x_i, x) + b_k` on a raw (unscaled) feature row.
    pub fn decision_value(&self, class: usize, x: &[f64]) -> Result<f64> {
        if class >= self.n_classes() {
            return Err(SvmError::Problem(format!("no binary model for class {}", class)));
        }
        Ok(self.with_kernel_row(class, &self.kernel_row(x)?))
    }

    pub fn decision_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        let krow = self.kernel_row(x)?;
        Ok((0..self.n_classes()).map(|k| self.with_kernel_row(k, &krow)).collect())
    }

    /// `argmax_k f_k(x)` with ties going to the lowest class index, plus the
    /// raw per-class decision values.
    pub fn predict(&self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        let scores = self.decision_values(x)?;
        Ok((argmax_lowest(&scores), scores))
    }
}

pub(crate) fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = k;
        }
    }
    best
}
