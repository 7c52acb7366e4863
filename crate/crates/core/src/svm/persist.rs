//! Model files reuse the `RNW1` container. Index vectors are stored as
//! `f32`-cast integers, exact up to 2^24 rows. The kernel lives in a JSON
//! sidecar next to the tensor file.
//!
//! Tensors written:
//!
//! ```text
//! scaling.mean        [D]
//! scaling.std         [D]
//! support_vectors     [S, D]   standardised rows
//! support_rows        [S]      training-row index of each stored row
//! class{k}.sv_indices [n_k]    training-row indices (f32-cast)
//! class{k}.coef       [n_k]    α·y
//! class{k}.bias       [1]
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ovr::{BinaryModel, TrainedSvmModel};
use super::{KernelSpec, Matrix, Result, Standardizer, SvmError};
use crate::rnw;
use crate::tensor::Tensor;

const MAX_EXACT_INDEX: usize = 1 << 24;

#[derive(Serialize, Deserialize)]
struct Sidecar {
    kernel: KernelSpec,
    n_classes: usize,
}

/// `model.rnw` → `model.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn vector(values: impl IntoIterator<Item = f64>) -> Tensor {
    let data: Vec<f32> = values.into_iter().map(|v| v as f32).collect();
    Tensor::new(vec![data.len()], data).expect("rank-1 tensor")
}

fn persist_err(e: impl std::fmt::Display) -> SvmError {
    SvmError::Persist(e.to_string())
}

pub fn save_model(model: &TrainedSvmModel, path: &Path) -> Result<()> {
    let (sv, rows) = model.support_vectors();
    if rows.iter().any(|&r| r >= MAX_EXACT_INDEX) {
        return Err(SvmError::Persist("support-vector index too large for f32 storage".into()));
    }
    let mut tensors: Vec<(String, Tensor)> = vec![
        ("scaling.mean".into(), vector(model.scaling().mean().iter().copied())),
        ("scaling.std".into(), vector(model.scaling().std().iter().copied())),
        (
            "support_vectors".into(),
            Tensor::new(vec![sv.rows(), sv.cols()], sv.data().iter().map(|&v| v as f32).collect())
                .expect("matrix shape"),
        ),
        ("support_rows".into(), vector(rows.iter().map(|&r| r as f64))),
    ];
    for b in model.binaries() {
        let k = b.class;
        tensors.push((format!("class{k}.sv_indices"), vector(b.sv_indices.iter().map(|&i| i as f64))));
        tensors.push((format!("class{k}.coef"), vector(b.coef.iter().copied())));
        tensors.push((format!("class{k}.bias"), vector([b.bias])));
    }
    let mut buf = Vec::new();
    rnw::write_tensors(&mut buf, tensors.iter().map(|(n, t)| (n.as_str(), t))).map_err(persist_err)?;
    fs::write(path, buf).map_err(persist_err)?;
    let sidecar = Sidecar {
        kernel: *model.kernel(),
        n_classes: model.n_classes(),
    };
    let json = serde_json::to_string_pretty(&sidecar).map_err(persist_err)?;
    fs::write(sidecar_path(path), json).map_err(persist_err)?;
    Ok(())
}

fn indices(t: &Tensor, name: &str) -> Result<Vec<usize>> {
    t.data()
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 && (v as usize) < MAX_EXACT_INDEX {
                Ok(v as usize)
            } else {
                Err(SvmError::Persist(format!("{name}: {v} is not a row index")))
            }
        })
        .collect()
}

pub fn load_model(path: &Path) -> Result<TrainedSvmModel> {
    let json = fs::read_to_string(sidecar_path(path)).map_err(persist_err)?;
    let sidecar: Sidecar = serde_json::from_str(&json).map_err(persist_err)?;
    let bytes = fs::read(path).map_err(persist_err)?;
    let mut tensors: BTreeMap<String, Tensor> = rnw::read_tensors(&bytes).map_err(persist_err)?.into_iter().collect();
    let mut take = |name: &str| {
        tensors
            .remove(name)
            .ok_or_else(|| SvmError::Persist(format!("missing tensor: {name}")))
    };
    let f64s = |t: &Tensor| t.data().iter().map(|&v| v as f64).collect::<Vec<_>>();

    let scaling = Standardizer::from_parts(f64s(&take("scaling.mean")?), f64s(&take("scaling.std")?))?;
    let sv = take("support_vectors")?;
    let support_rows = indices(&take("support_rows")?, "support_rows")?;
    let dim = scaling.dim();
    let support_vectors = match sv.dims() {
        [s, d] if *s == support_rows.len() && *d == dim => Matrix::new(*s, *d, f64s(&sv))?,
        [0] if support_rows.is_empty() => Matrix::new(0, dim, Vec::new())?,
        other => {
            return Err(SvmError::Persist(format!(
                "support_vectors has shape {:?}, expected [{}, {}]",
                other,
                support_rows.len(),
                dim
            )))
        }
    };
    let slot_of: BTreeMap<usize, usize> = support_rows.iter().enumerate().map(|(s, &r)| (r, s)).collect();

    let mut binaries = Vec::with_capacity(sidecar.n_classes);
    for k in 0..sidecar.n_classes {
        let sv_indices = indices(&take(&format!("class{k}.sv_indices"))?, "sv_indices")?;
        let coef = f64s(&take(&format!("class{k}.coef"))?);
        let bias = take(&format!("class{k}.bias"))?;
        if coef.len() != sv_indices.len() || bias.len() != 1 {
            return Err(SvmError::Persist(format!("class{k}: inconsistent tensor lengths")));
        }
        let slots = sv_indices
            .iter()
            .map(|i| {
                slot_of
                    .get(i)
                    .copied()
                    .ok_or_else(|| SvmError::Persist(format!("class{k}: row {i} is not a stored support vector")))
            })
            .collect::<Result<Vec<_>>>()?;
        binaries.push(BinaryModel {
            class: k,
            sv_indices,
            coef,
            bias: bias.data()[0] as f64,
            slots,
        });
    }
    if let Some(extra) = tensors.keys().next() {
        return Err(SvmError::Persist(format!("unexpected tensor: {extra}")));
    }
    Ok(TrainedSvmModel {
        kernel: sidecar.kernel,
        scaling,
        support_vectors,
        support_rows,
        binaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use crate::svm::{ovr_train, SvmParams};

    fn model() -> (TrainedSvmModel, Matrix) {
        let mut rng = SplitMix64::new(11);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for k in 0..3 {
            for _ in 0..15 {
                rows.push([k as f64 * 3.0 + rng.normal(), rng.normal() * 2.0, rng.normal()]);
                labels.push(k);
            }
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let kernel = KernelSpec::quadratic(3.0, 1.0).unwrap();
        (ovr_train(&x, &labels, 3, &kernel, &SvmParams::default()).unwrap(), x)
    }

    #[test]
    fn save_load_preserves_predictions() {
        let dir = std::env::temp_dir().join(format!("cxr-persist-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.rnw");
        let (m, x) = model();
        save_model(&m, &path).unwrap();
        assert!(sidecar_path(&path).exists());
        let back = load_model(&path).unwrap();
        assert_eq!(back.kernel(), m.kernel());
        assert_eq!(back.n_classes(), 3);
        for i in 0..x.rows() {
            let (a, sa) = m.predict(x.row(i)).unwrap();
            let (b, sb) = back.predict(x.row(i)).unwrap();
            assert_eq!(a, b);
            for (p, q) in sa.iter().zip(&sb) {
                assert!((p - q).abs() < 1e-3 * (1.0 + p.abs()));
            }
        }
        fs::remove_file(sidecar_path(&path)).unwrap();
        assert!(matches!(load_model(&path), Err(SvmError::Persist(_))));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn non_integral_index_is_rejected() {
        let t = Tensor::new(vec![2], vec![1.0, 2.5]).unwrap();
        assert!(indices(&t, "x").is_err());
        let t = Tensor::new(vec![1], vec![-1.0]).unwrap();
        assert!(indices(&t, "x").is_err());
    }
}
