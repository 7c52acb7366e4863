//! ResNet-50 (v1 layout) inference to the 1000-wide fully connected output.
//!
//! The graph is a 7×7/2 stem convolution with folded batch norm, ReLU and a
//! 3×3/2 max pool, followed by four stages of bottleneck blocks
//! (`[3, 4, 6, 3]`), global average pooling and a 2048→1000 linear layer.
//! Every bottleneck runs 1×1, 3×3, 1×1 convolutions; the first block of
//! stages 2–4 strides in its 3×3 convolution. The first block of every stage
//! changes the channel count and therefore uses a 1×1 projection shortcut.
//!
//! Weight names follow a fixed dotted scheme:
//!
//! ```text
//! stem.conv.weight  stem.bn.scale  stem.bn.shift
//! stage{s}.block{b}.conv{1,2,3}.weight
//! stage{s}.block{b}.bn{1,2,3}.scale / .shift
//! stage{s}.block0.downsample.conv.weight
//! stage{s}.block0.downsample.bn.scale / .shift
//! fc.weight  fc.bias
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::features::{FeatureMatrix, FEATURE_DIM};
use crate::rng::SplitMix64;
use crate::rnw::{self, RnwError};
use crate::tensor::{self, window_extent, Tensor, TensorError};

pub const INPUT_SIZE: usize = 224;
pub const INPUT_CHANNELS: usize = 3;
pub const BLOCK_COUNTS: [usize; 4] = [3, 4, 6, 3];
const STAGE_WIDTHS: [usize; 4] = [64, 128, 256, 512];
const EXPANSION: usize = 4;

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("cannot read weights file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Format(#[from] RnwError),
    #[error("missing tensor: {0}")]
    MissingTensor(String),
    #[error("unexpected tensor: {0}")]
    UnexpectedTensor(String),
    #[error("tensor {name}: expected shape {expected:?}, found {found:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
}

#[derive(Debug, Error)]
pub enum ForwardError {
    #[error("expected input N×3×224×224, got {0:?}")]
    InputShape(Vec<usize>),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("sample {id}: {source}")]
    Sample {
        id: String,
        #[source]
        source: Box<ForwardError>,
    },
}

/// A convolution followed by its folded batch norm.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvBn {
    pub conv: String,
    pub bn: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvBn {
    fn new(conv: String, bn: String, in_channels: usize, out_channels: usize, kernel: usize, stride: usize) -> Self {
        Self {
            conv,
            bn,
            in_channels,
            out_channels,
            kernel,
            stride,
            pad: kernel / 2,
        }
    }

    pub fn weight_name(&self) -> String {
        format!("{}.weight", self.conv)
    }

    pub fn scale_name(&self) -> String {
        format!("{}.scale", self.bn)
    }

    pub fn shift_name(&self) -> String {
        format!("{}.shift", self.bn)
    }

    pub fn weight_dims(&self) -> Vec<usize> {
        vec![self.out_channels, self.in_channels, self.kernel, self.kernel]
    }

    pub fn output_extent(&self, size: usize) -> Result<usize, TensorError> {
        window_extent("conv", size, self.kernel, self.stride, self.pad)
    }

    fn specs(&self) -> [TensorSpec; 3] {
        [
            TensorSpec::new(self.weight_name(), self.weight_dims()),
            TensorSpec::new(self.scale_name(), vec![self.out_channels]),
            TensorSpec::new(self.shift_name(), vec![self.out_channels]),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bottleneck {
    pub conv1: ConvBn,
    pub conv2: ConvBn,
    pub conv3: ConvBn,
    pub downsample: Option<ConvBn>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub dims: Vec<usize>,
}

impl TensorSpec {
    fn new(name: String, dims: Vec<usize>) -> Self {
        Self { name, dims }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Spatial extents and channel counts after the stem convolution, the max
/// pool, each stage, and the global pool (channels there are the fc width).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeTrace {
    pub extents: Vec<usize>,
    pub channels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResNet50Graph {
    pub stem: ConvBn,
    pub pool_kernel: usize,
    pub pool_stride: usize,
    pub pool_pad: usize,
    pub stages: Vec<Vec<Bottleneck>>,
    pub fc_in: usize,
    pub fc_out: usize,
}

/// Builds the ResNet-50 graph and checks its shape chain for a 224×224 input.
pub fn build_resnet50() -> ResNet50Graph {
    let stem = ConvBn::new("stem.conv".into(), "stem.bn".into(), INPUT_CHANNELS, 64, 7, 2);
    let mut stages = Vec::with_capacity(4);
    let mut in_ch = 64;
    for (s, (&blocks, &width)) in BLOCK_COUNTS.iter().zip(&STAGE_WIDTHS).enumerate() {
        let out_ch = width * EXPANSION;
        let stage_stride = if s == 0 { 1 } else { 2 };
        let mut stage = Vec::with_capacity(blocks);
        for b in 0..blocks {
            let p = format!("stage{}.block{}", s + 1, b);
            let stride = if b == 0 { stage_stride } else { 1 };
            let block_in = if b == 0 { in_ch } else { out_ch };
            let downsample = (b == 0).then(|| {
                ConvBn::new(
                    format!("{p}.downsample.conv"),
                    format!("{p}.downsample.bn"),
                    block_in,
                    out_ch,
                    1,
                    stride,
                )
            });
            stage.push(Bottleneck {
                conv1: ConvBn::new(format!("{p}.conv1"), format!("{p}.bn1"), block_in, width, 1, 1),
                conv2: ConvBn::new(format!("{p}.conv2"), format!("{p}.bn2"), width, width, 3, stride),
                conv3: ConvBn::new(format!("{p}.conv3"), format!("{p}.bn3"), width, out_ch, 1, 1),
                downsample,
            });
        }
        stages.push(stage);
        in_ch = out_ch;
    }
    let graph = ResNet50Graph {
        stem,
        pool_kernel: 3,
        pool_stride: 2,
        pool_pad: 1,
        stages,
        fc_in: in_ch,
        fc_out: FEATURE_DIM,
    };
    let trace = graph
        .shape_trace(INPUT_SIZE)
        .expect("ResNet-50 geometry is valid for 224x224 input");
    assert_eq!(trace.extents, [112, 56, 56, 28, 14, 7, 1]);
    assert_eq!(trace.channels, [64, 64, 256, 512, 1024, 2048, 1000]);
    assert_eq!(graph.layer_count(), 50);
    graph
}

impl ResNet50Graph {
    pub fn block_counts(&self) -> Vec<usize> {
        self.stages.iter().map(Vec::len).collect()
    }

    pub fn blocks(&self) -> impl Iterator<Item = &Bottleneck> {
        self.stages.iter().flatten()
    }

    /// Weighted layers on the main path: stem conv, three convolutions per
    /// bottleneck and the fully connected layer. Projection shortcuts are
    /// not counted, following the usual convention for the "50".
    pub fn layer_count(&self) -> usize {
        1 + 3 * self.blocks().count() + 1
    }

    /// Every tensor the graph needs, in execution order.
    pub fn manifest(&self) -> Vec<TensorSpec> {
        let mut out: Vec<TensorSpec> = self.stem.specs().into();
        for block in self.blocks() {
            for conv in [&block.conv1, &block.conv2, &block.conv3] {
                out.extend(conv.specs());
            }
            if let Some(ds) = &block.downsample {
                out.extend(ds.specs());
            }
        }
        out.push(TensorSpec::new("fc.weight".into(), vec![self.fc_out, self.fc_in]));
        out.push(TensorSpec::new("fc.bias".into(), vec![self.fc_out]));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.manifest().iter().map(TensorSpec::len).sum()
    }

    pub fn shape_trace(&self, input: usize) -> Result<ShapeTrace, TensorError> {
        let mut extents = Vec::new();
        let mut channels = Vec::new();
        let mut size = self.stem.output_extent(input)?;
        extents.push(size);
        channels.push(self.stem.out_channels);
        size = window_extent("maxpool", size, self.pool_kernel, self.pool_stride, self.pool_pad)?;
        extents.push(size);
        channels.push(self.stem.out_channels);
        for stage in &self.stages {
            for block in stage {
                size = block.conv2.output_extent(size)?;
                if let Some(ds) = &block.downsample {
                    assert_eq!(ds.output_extent(extents[extents.len() - 1])?, size);
                }
            }
            extents.push(size);
            channels.push(stage.last().map_or(0, |b| b.conv3.out_channels));
        }
        extents.push(1);
        channels.push(self.fc_out);
        Ok(ShapeTrace { extents, channels })
    }

    /// Runs the network on an `N×3×224×224` batch, returning `N×1000`
    /// pre-softmax fully connected outputs. Samples are independent, so the
    /// result for a sample does not depend on what else is in the batch.
    pub fn forward(&self, weights: &ModelWeights, batch: &Tensor) -> Result<Tensor, ForwardError> {
        let n = match batch.dims() {
            &[n, INPUT_CHANNELS, INPUT_SIZE, INPUT_SIZE] => n,
            other => return Err(ForwardError::InputShape(other.to_vec())),
        };
        let samples = (0..n).map(|i| batch.sample(i)).collect::<Result<Vec<_>, _>>()?;
        let rows = crate::par_map(samples, |x| self.forward_sample(weights, &x));
        let mut data = Vec::with_capacity(n * self.fc_out);
        for row in rows {
            data.extend(row?);
        }
        Ok(Tensor::new(vec![n, self.fc_out], data)?)
    }

    fn forward_sample(&self, w: &ModelWeights, x: &Tensor) -> Result<Vec<f32>, ForwardError> {
        let mut x = conv_bn(&self.stem, w, x, true)?;
        x = tensor::maxpool2d(&x, self.pool_kernel, self.pool_stride, self.pool_pad)?;
        for block in self.blocks() {
            x = bottleneck(block, w, &x)?;
        }
        let pooled = tensor::global_avg_pool(&x)?;
        Ok(linear(w.get("fc.weight"), w.get("fc.bias"), pooled.data()))
    }
}

fn conv_bn(spec: &ConvBn, w: &ModelWeights, x: &Tensor, with_relu: bool) -> Result<Tensor, TensorError> {
    let y = tensor::conv2d(x, w.get(&spec.weight_name()), None, spec.stride, spec.pad)?;
    let y = tensor::batchnorm_inference(&y, w.get(&spec.scale_name()).data(), w.get(&spec.shift_name()).data())?;
    Ok(if with_relu { tensor::relu(&y) } else { y })
}

fn bottleneck(block: &Bottleneck, w: &ModelWeights, x: &Tensor) -> Result<Tensor, TensorError> {
    let y = conv_bn(&block.conv1, w, x, true)?;
    let y = conv_bn(&block.conv2, w, &y, true)?;
    let y = conv_bn(&block.conv3, w, &y, false)?;
    let shortcut = match &block.downsample {
        Some(ds) => conv_bn(ds, w, x, false)?,
        None => x.clone(),
    };
    Ok(tensor::relu(&tensor::add(&y, &shortcut)?))
}

/// `W·x + b` with `W` stored `out×in`; accumulation ascends over inputs.
fn linear(weight: &Tensor, bias: &Tensor, x: &[f32]) -> Vec<f32> {
    let inputs = x.len();
    weight
        .data()
        .chunks_exact(inputs)
        .zip(bias.data())
        .map(|(row, &b)| {
            let mut acc = 0.0f32;
            for (wv, xv) in row.iter().zip(x) {
                acc += wv * xv;
            }
            acc + b
        })
        .collect()
}

/// Named parameters for the graph, verified against its manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    tensors: BTreeMap<String, Tensor>,
    pub source: String,
    pub checksum: String,
}

impl ModelWeights {
    /// Checks `tensors` against the manifest: extra names, wrong shapes and
    /// missing names are each rejected with the offending tensor named.
    pub fn from_tensors(
        graph: &ResNet50Graph,
        tensors: Vec<(String, Tensor)>,
        source: impl Into<String>,
        checksum: impl Into<String>,
    ) -> Result<Self, WeightsError> {
        let manifest = graph.manifest();
        let expected: HashMap<&str, &[usize]> =
            manifest.iter().map(|s| (s.name.as_str(), s.dims.as_slice())).collect();
        let mut map = BTreeMap::new();
        for (name, t) in tensors {
            match expected.get(name.as_str()) {
                None => return Err(WeightsError::UnexpectedTensor(name)),
                Some(&dims) if dims != t.dims() => {
                    return Err(WeightsError::ShapeMismatch {
                        name,
                        expected: dims.to_vec(),
                        found: t.dims().to_vec(),
                    })
                }
                Some(_) => {
                    map.insert(name, t);
                }
            }
        }
        if let Some(missing) = manifest.iter().find(|s| !map.contains_key(&s.name)) {
            return Err(WeightsError::MissingTensor(missing.name.clone()));
        }
        Ok(Self {
            tensors: map,
            source: source.into(),
            checksum: checksum.into(),
        })
    }

    pub fn from_bytes(graph: &ResNet50Graph, bytes: &[u8], source: impl Into<String>) -> Result<Self, WeightsError> {
        let tensors = rnw::read_tensors(bytes)?;
        Self::from_tensors(graph, tensors, source, sha256_hex(bytes))
    }

    pub fn load(graph: &ResNet50Graph, path: impl AsRef<Path>) -> Result<Self, WeightsError> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|source| WeightsError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(graph, &bytes, path.display().to_string())
    }

    /// Serialises in manifest order.
    pub fn to_bytes(&self, graph: &ResNet50Graph) -> Vec<u8> {
        let manifest = graph.manifest();
        let mut buf = Vec::new();
        rnw::write_tensors(
            &mut buf,
            manifest.iter().map(|s| (s.name.as_str(), &self.tensors[&s.name])),
        )
        .expect("writing to a Vec cannot fail");
        buf
    }

    pub fn save(&self, graph: &ResNet50Graph, path: impl AsRef<Path>) -> std::io::Result<()> {
        fs::write(path, self.to_bytes(graph))
    }

    /// Panics on an unknown name; validated weights always hold the manifest.
    pub fn get(&self, name: &str) -> &Tensor {
        self.tensors
            .get(name)
            .unwrap_or_else(|| panic!("weights validated without {}", name))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Seeded He-style random weights. Useful for smoke runs and tests; these
    /// are not trained parameters. The last batch norm of each bottleneck is
    /// damped so activations stay O(1) through all sixteen residual blocks.
    pub fn random(graph: &ResNet50Graph, seed: u64) -> Self {
        let mut rng = SplitMix64::new(seed);
        let mut uniform = |len: usize, half_width: f64, center: f64| -> Vec<f32> {
            (0..len)
                .map(|_| (center + half_width * (2.0 * rng.next_f64() - 1.0)) as f32)
                .collect()
        };
        let mut tensors = Vec::new();
        for spec in graph.manifest() {
            let name = &spec.name;
            let len = spec.len();
            let data = if name.ends_with(".weight") && spec.dims.len() == 4 {
                let fan_in: usize = spec.dims[1..].iter().product();
                uniform(len, (6.0 / fan_in as f64).sqrt(), 0.0)
            } else if name == "fc.weight" {
                uniform(len, (3.0 / graph.fc_in as f64).sqrt(), 0.0)
            } else if name == "fc.bias" {
                uniform(len, 0.1, 0.0)
            } else if name.ends_with(".scale") {
                let damped = name.contains(".bn3.");
                uniform(len, 0.05, if damped { 0.2 } else { 1.0 })
            } else {
                uniform(len, 0.05, 0.0)
            };
            let t = Tensor::new(spec.dims.clone(), data).expect("manifest dims are valid");
            tensors.push((spec.name, t));
        }
        let mut w = Self::from_tensors(graph, tensors, format!("random(seed={})", seed), String::new())
            .expect("random weights follow the manifest");
        w.checksum = sha256_hex(&w.to_bytes(graph));
        w
    }

    /// Replaces every tensor with `f(name, tensor)`, keeping the manifest.
    pub fn map(&self, f: impl Fn(&str, &Tensor) -> Tensor) -> Self {
        let tensors = self
            .tensors
            .iter()
            .map(|(n, t)| {
                let out = f(n, t);
                assert_eq!(out.dims(), t.dims(), "map must preserve shapes");
                (n.clone(), out)
            })
            .collect();
        Self {
            tensors,
            source: self.source.clone(),
            checksum: String::new(),
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{:02x}", b)).collect()
}

/// One preprocessed image to run through the network.
#[derive(Debug, Clone)]
pub struct LabeledImage {
    pub id: String,
    pub label: usize,
    pub tensor: Tensor,
}

/// Runs the network over `images` in batches of `batch_size`, keeping input
/// order. Each image must be `1×3×224×224` (or `3×224×224`).
pub fn extract_features<I>(
    graph: &ResNet50Graph,
    weights: &ModelWeights,
    images: I,
    batch_size: usize,
) -> Result<FeatureMatrix, ForwardError>
where
    I: IntoIterator<Item = LabeledImage>,
{
    let batch_size = batch_size.max(1);
    let mut features = FeatureMatrix::new(graph.fc_out);
    let mut pending: Vec<LabeledImage> = Vec::with_capacity(batch_size);
    let flush = |pending: &mut Vec<LabeledImage>, features: &mut FeatureMatrix| -> Result<(), ForwardError> {
        if pending.is_empty() {
            return Ok(());
        }
        let parts: Vec<Tensor> = pending.iter().map(|img| img.tensor.clone()).collect();
        let batch = Tensor::stack(&parts)?;
        let out = graph.forward(weights, &batch).map_err(|e| ForwardError::Sample {
            id: pending[0].id.clone(),
            source: Box::new(e),
        })?;
        for (img, row) in pending.drain(..).zip(out.data().chunks_exact(graph.fc_out)) {
            features
                .push_row(img.id, img.label, row)
                .expect("forward output has fc width");
        }
        Ok(())
    };
    for mut img in images {
        let dims = img.tensor.dims().to_vec();
        let ok = match dims[..] {
            [1, INPUT_CHANNELS, INPUT_SIZE, INPUT_SIZE] => true,
            [INPUT_CHANNELS, INPUT_SIZE, INPUT_SIZE] => {
                img.tensor = img.tensor.reshape(vec![1, INPUT_CHANNELS, INPUT_SIZE, INPUT_SIZE])?;
                true
            }
            _ => false,
        };
        if !ok {
            return Err(ForwardError::Sample {
                id: img.id,
                source: Box::new(ForwardError::InputShape(dims)),
            });
        }
        pending.push(img);
        if pending.len() == batch_size {
            flush(&mut pending, &mut features)?;
        }
    }
    flush(&mut pending, &mut features)?;
    Ok(features)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Extent arithmetic `(H + 2p − k)/s + 1`, applied layer by layer by hand.
    #[test]
    fn stage_extents_for_224_input() {
        let g = build_resnet50();
        let stem = (224 + 2 * 3 - 7) / 2 + 1;
        let pool = (stem + 2 - 3) / 2 + 1;
        let s2 = (pool + 2 - 3) / 2 + 1;
        let s3 = (s2 + 2 - 3) / 2 + 1;
        let s4 = (s3 + 2 - 3) / 2 + 1;
        assert_eq!([stem, pool, s2, s3, s4], [112, 56, 28, 14, 7]);
        let trace = g.shape_trace(224).unwrap();
        assert_eq!(trace.extents, vec![stem, pool, pool, s2, s3, s4, 1]);
    }

    #[test]
    fn block_structure() {
        let g = build_resnet50();
        assert_eq!(g.block_counts(), vec![3, 4, 6, 3]);
        assert_eq!(g.blocks().count(), 16);
        assert_eq!(g.layer_count(), 50);
        for (s, stage) in g.stages.iter().enumerate() {
            for (b, block) in stage.iter().enumerate() {
                assert_eq!(
                    [block.conv1.kernel, block.conv2.kernel, block.conv3.kernel],
                    [1, 3, 1]
                );
                let expected_stride = if b == 0 && s > 0 { 2 } else { 1 };
                assert_eq!(block.conv2.stride, expected_stride);
                assert_eq!(block.conv1.stride, 1);
                assert_eq!(block.downsample.is_some(), b == 0);
            }
        }
    }

    #[test]
    fn manifest_names_and_parameter_count() {
        let g = build_resnet50();
        let m = g.manifest();
        assert_eq!(m.len(), 3 + 16 * 9 + 4 * 3 + 2);
        assert_eq!(m[0].name, "stem.conv.weight");
        assert_eq!(m[0].dims, vec![64, 3, 7, 7]);
        assert!(m.iter().any(|s| s.name == "stage1.block0.conv1.weight"));
        assert!(m.iter().any(|s| s.name == "stage4.block2.bn3.shift"));
        assert_eq!(m.last().unwrap().name, "fc.bias");

        // Summed from the manifest shapes by hand: convolutions without bias,
        // two folded batch-norm vectors per convolution, fc with bias.
        let mut total = 64 * 3 * 49 + 2 * 64;
        let mut in_ch = 64;
        for (blocks, width) in [(3, 64), (4, 128), (6, 256), (3, 512)] {
            let out = width * 4;
            for b in 0..blocks {
                let cin = if b == 0 { in_ch } else { out };
                total += cin * width + 2 * width;
                total += width * width * 9 + 2 * width;
                total += width * out + 2 * out;
                if b == 0 {
                    total += cin * out + 2 * out;
                }
            }
            in_ch = out;
        }
        total += 2048 * 1000 + 1000;
        assert_eq!(g.parameter_count(), total);
        assert_eq!(total, 25_557_032);
    }

    #[test]
    fn validation_errors_name_the_tensor() {
        let g = build_resnet50();
        let w = ModelWeights::random(&g, 1);
        let mut tensors: Vec<(String, Tensor)> = g
            .manifest()
            .into_iter()
            .map(|s| (s.name.clone(), w.get(&s.name).clone()))
            .collect();

        let without_fc: Vec<_> = tensors.iter().filter(|(n, _)| n != "fc.weight").cloned().collect();
        let err = ModelWeights::from_tensors(&g, without_fc, "t", "").unwrap_err();
        assert_eq!(err.to_string(), "missing tensor: fc.weight");

        let mut extra = tensors.clone();
        extra.push(("bogus".into(), Tensor::zeros(vec![1]).unwrap()));
        assert!(matches!(
            ModelWeights::from_tensors(&g, extra, "t", ""),
            Err(WeightsError::UnexpectedTensor(n)) if n == "bogus"
        ));

        tensors[1].1 = Tensor::zeros(vec![65]).unwrap();
        assert!(matches!(
            ModelWeights::from_tensors(&g, tensors, "t", ""),
            Err(WeightsError::ShapeMismatch { name, .. }) if name == "stem.bn.scale"
        ));
    }

    #[test]
    fn bad_magic_is_a_format_error() {
        let g = build_resnet50();
        let err = ModelWeights::from_bytes(&g, b"XXXX\0\0\0\0", "t").unwrap_err();
        assert!(matches!(err, WeightsError::Format(RnwError::BadMagic(_))));
    }

    #[test]
    fn forward_rejects_wrong_input_shape() {
        let g = build_resnet50();
        let w = ModelWeights::random(&g, 1);
        let x = Tensor::zeros(vec![1, 3, 32, 32]).unwrap();
        assert!(matches!(g.forward(&w, &x), Err(ForwardError::InputShape(_))));
        let x = Tensor::zeros(vec![1, 1, 224, 224]).unwrap();
        assert!(matches!(g.forward(&w, &x), Err(ForwardError::InputShape(_))));
    }

    #[test]
    fn empty_stream_gives_empty_matrix() {
        let g = build_resnet50();
        let w = ModelWeights::random(&g, 1);
        let m = extract_features(&g, &w, Vec::new(), 8).unwrap();
        assert_eq!(m.n_rows(), 0);
        assert_eq!(m.dim(), 1000);
    }

    #[test]
    fn bad_image_is_tagged_with_its_id() {
        let g = build_resnet50();
        let w = ModelWeights::random(&g, 1);
        let imgs = vec![LabeledImage {
            id: "img/7.png".into(),
            label: 0,
            tensor: Tensor::zeros(vec![1, 3, 10, 10]).unwrap(),
        }];
        let err = extract_features(&g, &w, imgs, 1).unwrap_err();
        assert!(err.to_string().contains("img/7.png"), "{}", err);
    }
}
