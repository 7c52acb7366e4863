//! Soft-margin kernel SVM: kernels, standardisation, an SMO solver for the
//! binary dual and a one-vs-rest multi-class wrapper.

mod kernel;
mod ovr;
mod persist;
mod scaling;
mod smo;

use thiserror::Error;

pub use kernel::{KernelKind, KernelSpec};
pub use ovr::{ovr_train, BinaryModel, SvmParams, TrainedSvmModel};
pub use persist::{load_model, save_model, sidecar_path};
pub use scaling::Standardizer;
pub use smo::{dual_objective, smo_train, solve, BinaryProblem, KernelMatrix, SmoSolution};

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid kernel: {0}")]
    Kernel(String),
    #[error("invalid problem: {0}")]
    Problem(String),
    #[error("cannot standardise: {0}")]
    Scaling(String),
    #[error("class {0} has no training samples")]
    ClassAbsent(usize),
    #[error(
        "SMO did not converge after {iterations} iterations \
         (max violation {violation:.3e}, duality gap {duality_gap:.3e})"
    )]
    NotConverged {
        iterations: usize,
        violation: f64,
        duality_gap: f64,
    },
    #[error("model file: {0}")]
    Persist(String),
}

pub type Result<T> = std::result::Result<T, SvmError>;

/// Row-major `f64` matrix used for SVM inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(SvmError::Dimension {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(SvmError::Dimension {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
