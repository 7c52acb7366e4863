use serde::{Deserialize, Serialize};

use super::{Matrix, Result, SvmError};

/// Per-feature mean and sample standard deviation (N − 1 denominator).
/// Features with no spread get σ = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Result<Self> {
        let n = x.rows();
        if n < 2 || x.cols() == 0 {
            return Err(SvmError::Scaling(format!(
                "need at least 2 rows and 1 column, got {}x{}",
                n,
                x.cols()
            )));
        }
        let d = x.cols();
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for (m, v) in mean.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut ss = vec![0.0; d];
        for i in 0..n {
            for ((s, v), m) in ss.iter_mut().zip(x.row(i)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = ss
            .iter()
            .zip(&mean)
            .map(|(s, m)| {
                let sd = (s / (n - 1) as f64).sqrt();
                // Rounding in the mean leaves ~1e-17 residue on constant columns.
                if sd <= 1e-12 * m.abs().max(1.0) {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    /// Mean 0, std 1: applying it is a no-op.
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn from_parts(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(SvmError::Dimension {
                expected: mean.len(),
                got: std.len(),
            });
        }
        if std.iter().any(|&s| !(s > 0.0)) {
            return Err(SvmError::Scaling("std components must be positive".into()));
        }
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(SvmError::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }

    pub fn apply_matrix(&self, x: &Matrix) -> Result<Matrix> {
        let mut data = Vec::with_capacity(x.data().len());
        for i in 0..x.rows() {
            data.extend(self.apply(x.row(i))?);
        }
        Matrix::new(x.rows(), x.cols(), data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_column() {
        let x = Matrix::new(2, 1, vec![1.0, 3.0]).unwrap();
        let s = Standardizer::fit(&x).unwrap();
        assert_eq!(s.mean(), &[2.0]);
        assert_eq!(s.std(), &[2.0f64.sqrt()]);
        assert_eq!(s.apply(&[3.0]).unwrap(), vec![1.0 / 2.0f64.sqrt()]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let x = Matrix::new(3, 2, vec![5.0, 0.1, 5.0, 0.1, 5.0, 0.1]).unwrap();
        let s = Standardizer::fit(&x).unwrap();
        assert_eq!(s.std(), &[1.0, 1.0]);
        let out = s.apply(&[5.0, 0.1]).unwrap();
        assert_eq!(out[0], 0.0);
        assert!(out[1].abs() < 1e-15);
    }

    #[test]
    fn too_few_rows() {
        assert!(Standardizer::fit(&Matrix::new(1, 2, vec![1.0, 2.0]).unwrap()).is_err());
        assert!(Standardizer::fit(&Matrix::new(0, 2, vec![]).unwrap()).is_err());
        let s = Standardizer::identity(2);
        assert!(s.apply(&[1.0]).is_err());
    }

    #[test]
    fn standardized_training_columns_have_unit_moments() {
        let mut rng = crate::rng::SplitMix64::new(12);
        let rows = 57;
        let cols = 6;
        let data = (0..rows * cols)
            .map(|i| rng.normal() * (1 + i % cols) as f64 * 3.0 + (i % cols) as f64 * 10.0)
            .collect();
        let x = Matrix::new(rows, cols, data).unwrap();
        let z = Standardizer::fit(&x).unwrap().apply_matrix(&x).unwrap();
        for j in 0..cols {
            let col: Vec<f64> = (0..rows).map(|i| z.row(i)[j]).collect();
            let m = col.iter().sum::<f64>() / rows as f64;
            let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (rows - 1) as f64).sqrt();
            assert!(m.abs() < 1e-6);
            assert!((sd - 1.0).abs() < 1e-6);
        }
    }
}
