use thiserror::Error;

/// Dimensionality of the fully connected output used as the feature vector.
pub const FEATURE_DIM: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("row for {id:?} has {got} values, expected {expected}")]
    RowLength {
        id: String,
        got: usize,
        expected: usize,
    },
    #[error("row index {0} out of range")]
    RowIndex(usize),
}

/// An `N×D` real matrix of per-sample features with sample ids and class
/// labels carried alongside each row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    data: Vec<f32>,
    ids: Vec<String>,
    labels: Vec<usize>,
}

impl FeatureMatrix {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            data: Vec::new(),
            ids: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push_row(
        &mut self,
        id: impl Into<String>,
        label: usize,
        values: &[f32],
    ) -> Result<(), FeatureError> {
        let id = id.into();
        if values.len() != self.dim {
            return Err(FeatureError::RowLength {
                id,
                got: values.len(),
                expected: self.dim,
            });
        }
        self.data.extend_from_slice(values);
        self.ids.push(id);
        self.labels.push(label);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim.max(1)).take(self.n_rows())
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Rows converted to `f64`, row-major.
    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }

    pub fn select(&self, indices: &[usize]) -> Result<FeatureMatrix, FeatureError> {
        let mut out = FeatureMatrix::new(self.dim);
        for &i in indices {
            if i >= self.n_rows() {
                return Err(FeatureError::RowIndex(i));
            }
            out.push_row(self.ids[i].clone(), self.labels[i], self.row(i))?;
        }
        Ok(out)
    }
}
