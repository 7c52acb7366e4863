//! WebAssembly front end for the SVM and evaluation code in `cxr-core`,
//! played on small 2-D point clouds instead of ResNet features.
//!
//! Each exported function takes flat arrays and returns a JSON string; the
//! page in `www/` parses it and draws on a canvas.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use cxr_core::eval::{auc, class_metrics, cross_validate, roc_curve, ConfusionMatrix, CvConfig};
use cxr_core::rng::SplitMix64;
use cxr_core::svm::{ovr_train, KernelSpec, Matrix, SvmParams};

pub const N_CLASSES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Blobs {
    /// Interleaved `x0, y0, x1, y1, ...`.
    pub points: Vec<f64>,
    pub labels: Vec<u32>,
}

/// Three Gaussian clusters around the corners of a triangle in [-1, 1]².
/// `spread` is the per-axis standard deviation.
pub fn make_blobs(seed: u64, per_class: usize, spread: f64) -> Blobs {
    const CENTRES: [[f64; 2]; 3] = [[-0.5, -0.4], [0.5, -0.4], [0.0, 0.5]];
    let mut rng = SplitMix64::new(seed);
    let mut points = Vec::with_capacity(2 * N_CLASSES * per_class);
    let mut labels = Vec::with_capacity(N_CLASSES * per_class);
    for i in 0..N_CLASSES * per_class {
        let k = i % N_CLASSES;
        points.push(CENTRES[k][0] + spread * rng.normal());
        points.push(CENTRES[k][1] + spread * rng.normal());
        labels.push(k as u32);
    }
    Blobs { points, labels }
}

fn kernel_for(name: &str) -> Result<KernelSpec, String> {
    let spec = match name {
        "linear" => Ok(KernelSpec::linear()),
        "quadratic" => KernelSpec::quadratic(2.0, 1.0),
        "cubic" => KernelSpec::cubic(2.0, 1.0),
        other => return Err(format!("unknown kernel {other:?}")),
    };
    spec.map_err(|e| e.to_string())
}

fn to_matrix(points: &[f64], labels: &[u32]) -> Result<(Matrix, Vec<usize>), String> {
    if points.len() != 2 * labels.len() {
        return Err(format!("{} coordinates for {} labels", points.len(), labels.len()));
    }
    if let Some(&l) = labels.iter().find(|&&l| l as usize >= N_CLASSES) {
        return Err(format!("label {l} out of range"));
    }
    let x = Matrix::new(labels.len(), 2, points.to_vec()).map_err(|e| e.to_string())?;
    Ok((x, labels.iter().map(|&l| l as usize).collect()))
}

#[derive(Debug, Clone, Serialize)]
pub struct DecisionGrid {
    pub resolution: usize,
    /// Row-major from the top-left corner, `resolution²` winners.
    pub classes: Vec<u8>,
    /// Winning decision value per cell; near zero on the boundaries.
    pub margins: Vec<f64>,
    pub support_vectors: Vec<usize>,
    pub training_accuracy: f64,
}

/// Trains the one-vs-rest SVM on all points and labels every cell of a
/// `resolution × resolution` grid over [-1.5, 1.5]².
pub fn decision_grid(points: &[f64], labels: &[u32], kernel: &str, c: f64, resolution: usize) -> Result<DecisionGrid, String> {
    let (x, y) = to_matrix(points, labels)?;
    let params = SvmParams { c, ..SvmParams::default() };
    let model = ovr_train(&x, &y, N_CLASSES, &kernel_for(kernel)?, &params).map_err(|e| e.to_string())?;
    let mut classes = Vec::with_capacity(resolution * resolution);
    let mut margins = Vec::with_capacity(resolution * resolution);
    let step = 3.0 / resolution as f64;
    for r in 0..resolution {
        let py = 1.5 - (r as f64 + 0.5) * step;
        for col in 0..resolution {
            let px = -1.5 + (col as f64 + 0.5) * step;
            let (k, scores) = model.predict(&[px, py]).map_err(|e| e.to_string())?;
            classes.push(k as u8);
            margins.push(scores[k]);
        }
    }
    let correct = (0..y.len())
        .filter(|&i| model.predict(x.row(i)).map(|(k, _)| k == y[i]).unwrap_or(false))
        .count();
    let mut support_vectors = model.support_vectors().1.to_vec();
    support_vectors.sort_unstable();
    Ok(DecisionGrid {
        resolution,
        classes,
        margins,
        support_vectors,
        training_accuracy: 100.0 * correct as f64 / y.len() as f64,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassRow {
    pub sen: f64,
    pub spe: f64,
    pub acc: f64,
    pub auc: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CvSummary {
    /// Summed over every fold of every repeat.
    pub confusion: Vec<Vec<u64>>,
    pub per_class: Vec<ClassRow>,
    /// Out-of-fold scores of the last repeat, `scores[i][class]`, for the ROC explorer.
    pub scores: Vec<Vec<f64>>,
}

/// Repeated stratified k-fold cross-validation of the one-vs-rest SVM.
pub fn cv_summary(
    points: &[f64],
    labels: &[u32],
    kernel: &str,
    c: f64,
    k: usize,
    repeats: usize,
    seed: u64,
) -> Result<CvSummary, String> {
    let (x, y) = to_matrix(points, labels)?;
    let mut cfg = CvConfig::new(kernel_for(kernel)?);
    cfg.params.c = c;
    cfg.k = k;
    cfg.repeats = repeats;
    cfg.seed = seed;
    let run = cross_validate(&x, &y, N_CLASSES, &cfg).map_err(|e| e.to_string())?;
    let mut total = ConfusionMatrix::new(N_CLASSES);
    for r in 0..repeats {
        total.merge(&run.pooled(r));
    }
    let mut scores = vec![Vec::new(); y.len()];
    for fold in run.repeat(repeats - 1) {
        for (&i, s) in fold.test_indices.iter().zip(&fold.scores) {
            scores[i] = s.clone();
        }
    }
    let per_class = class_metrics(&total)
        .into_iter()
        .enumerate()
        .map(|(class, m)| {
            let col: Vec<f64> = scores.iter().map(|s| s[class]).collect();
            let pos: Vec<bool> = y.iter().map(|&l| l == class).collect();
            let a = roc_curve(&col, &pos).map(|p| auc(&p)).unwrap_or(f64::NAN);
            ClassRow {
                sen: m.sen,
                spe: m.spe,
                acc: m.acc,
                auc: a,
            }
        })
        .collect();
    Ok(CvSummary {
        confusion: total.rows(),
        per_class,
        scores,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RocView {
    pub points: Vec<[f64; 2]>,
    pub auc: f64,
    /// Operating point of `score ≥ threshold`.
    pub fpr: f64,
    pub tpr: f64,
}

pub fn roc_view(scores: &[f64], positive: &[bool], threshold: f64) -> Result<RocView, String> {
    let points = roc_curve(scores, positive).map_err(|e| e.to_string())?;
    let p = positive.iter().filter(|&&b| b).count() as f64;
    let n = positive.len() as f64 - p;
    let tp = scores.iter().zip(positive).filter(|&(&s, &b)| b && s >= threshold).count() as f64;
    let fp = scores.iter().zip(positive).filter(|&(&s, &b)| !b && s >= threshold).count() as f64;
    Ok(RocView {
        auc: auc(&points),
        points: points.into_iter().map(|(x, y)| [x, y]).collect(),
        fpr: fp / n,
        tpr: tp / p,
    })
}

fn json<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn blobs(seed: u32, per_class: u32, spread: f64) -> Result<String, JsError> {
    json(Ok(make_blobs(seed as u64, per_class as usize, spread)))
}

#[wasm_bindgen]
pub fn svm_regions(points: &[f64], labels: &[u32], kernel: &str, c: f64, resolution: u32) -> Result<String, JsError> {
    json(decision_grid(points, labels, kernel, c, resolution as usize))
}

#[wasm_bindgen]
pub fn cv_metrics(points: &[f64], labels: &[u32], kernel: &str, c: f64, k: u32, repeats: u32, seed: u32) -> Result<String, JsError> {
    json(cv_summary(points, labels, kernel, c, k as usize, repeats as usize, seed as u64))
}

/// `positive[i]` is nonzero for the positive class.
#[wasm_bindgen]
pub fn roc(scores: &[f64], positive: &[u8], threshold: f64) -> Result<String, JsError> {
    let pos: Vec<bool> = positive.iter().map(|&b| b != 0).collect();
    json(roc_view(scores, &pos, threshold))
}
