//! Chest X-ray classification pipeline: ResNet-50 features into a kernel SVM.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: dense `f32` tensors and the numeric kernels (GEMM, im2col,
//!   pooling, folded batch norm) used by the network.
//! - [`resnet`]: the ResNet-50 graph, the `RNW1` weight container and the
//!   forward pass that turns a 224×224 image into a 1000-value feature vector.
//! - [`preprocess`]: image decoding, grayscale replication, bilinear resizing
//!   and normalisation, plus the dataset manifest.
//! - [`svm`]: kernels, feature standardisation, an SMO solver and the
//!   one-vs-rest multi-class wrapper.
//! - [`eval`]: stratified k-fold plans, confusion matrices, SEN/SPE/ACC, ROC
//!   curves and the repeated cross-validation driver.

pub mod class;
pub mod eval;
pub mod features;
pub mod preprocess;
pub mod resnet;
pub mod rng;
pub mod rnw;
pub mod svm;
pub mod tensor;

pub use class::Class;
pub use features::FeatureMatrix;
pub use tensor::{Tensor, TensorError};

#[cfg(feature = "parallel")]
pub(crate) fn par_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    F: Fn(T) -> R,
{
    items.into_iter().map(f).collect()
}
