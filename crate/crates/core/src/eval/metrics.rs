use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::EvalError;

/// Square count matrix, rows = true class, columns = predicted class.
/// Serialises as a list of rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        Self {
            n: n_classes,
            counts: vec![0; n_classes * n_classes],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self, EvalError> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(EvalError::Length(bad.len(), n));
        }
        Ok(Self {
            n,
            counts: rows.concat(),
        })
    }

    pub fn n_classes(&self) -> usize {
        self.n
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.n + predicted]
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<(), EvalError> {
        for l in [truth, predicted] {
            if l >= self.n {
                return Err(EvalError::LabelOutOfRange {
                    label: l,
                    n_classes: self.n,
                });
            }
        }
        self.counts[truth * self.n + predicted] += 1;
        Ok(())
    }

    /// Entrywise sum. Panics on a size mismatch.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.n, other.n, "confusion matrices of different sizes");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n).map(|k| self.get(k, k)).sum()
    }

    pub fn row_total(&self, truth: usize) -> u64 {
        (0..self.n).map(|j| self.get(truth, j)).sum()
    }

    pub fn col_total(&self, predicted: usize) -> u64 {
        (0..self.n).map(|i| self.get(i, predicted)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.n.max(1)).map(<[u64]>::to_vec).collect()
    }
}

impl Serialize for ConfusionMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConfusionMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<u64>>::deserialize(d)?;
        ConfusionMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

pub fn confusion(truth: &[usize], predicted: &[usize], n_classes: usize) -> Result<ConfusionMatrix, EvalError> {
    if truth.len() != predicted.len() {
        return Err(EvalError::Length(truth.len(), predicted.len()));
    }
    let mut cm = ConfusionMatrix::new(n_classes);
    for (&t, &p) in truth.iter().zip(predicted) {
        cm.record(t, p)?;
    }
    Ok(cm)
}

/// One-vs-rest collapse for a single class. `sen`, `spe` and `acc` are
/// percentages; a zero denominator yields 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub fp: u64,
    pub sen: f64,
    pub spe: f64,
    pub acc: f64,
}

fn percent(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

pub fn class_metrics(cm: &ConfusionMatrix) -> Vec<ClassMetrics> {
    let total = cm.total();
    (0..cm.n_classes())
        .map(|k| {
            let tp = cm.get(k, k);
            let fn_ = cm.row_total(k) - tp;
            let fp = cm.col_total(k) - tp;
            let tn = total - tp - fn_ - fp;
            ClassMetrics {
                tp,
                fn_,
                tn,
                fp,
                sen: percent(tp, tp + fn_),
                spe: percent(tn, tn + fp),
                acc: percent(tp + tn, total),
            }
        })
        .collect()
}
