//! Dense tensors and the numeric kernels the network is built from.
//!
//! Storage is row-major `f32` with the last dimension fastest. Images and
//! activations use the `(batch, channel, height, width)` convention.
//!
//! Convolution is cross-correlation (no kernel flip). All kernels are pure
//! functions; a [`Tensor`] is never mutated after construction.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: {reason}")]
    InvalidShape { op: &'static str, reason: String },
}

type Result<T> = std::result::Result<T, TensorError>;

#[derive(Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("dims", &self.dims)
            .field("len", &self.data.len())
            .finish()
    }
}

impl Tensor {
    /// Wraps `data` with the given extents. Ranks 1 through 4 are accepted and
    /// every extent must be positive.
    pub fn new(dims: impl Into<Vec<usize>>, data: Vec<f32>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() || dims.len() > 4 {
            return Err(TensorError::InvalidShape {
                op: "tensor",
                reason: format!("rank must be 1..=4, got {:?}", dims),
            });
        }
        if dims.contains(&0) {
            return Err(TensorError::InvalidShape {
                op: "tensor",
                reason: format!("extents must be positive, got {:?}", dims),
            });
        }
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(TensorError::InvalidShape {
                op: "tensor",
                reason: format!(
                    "dims {:?} need {} values, got {}",
                    dims,
                    expected,
                    data.len()
                ),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        let len = dims.iter().product();
        Self::new(dims, vec![0.0; len])
    }

    pub fn filled(dims: impl Into<Vec<usize>>, value: f32) -> Result<Self> {
        let dims = dims.into();
        let len = dims.iter().product();
        Self::new(dims, vec![value; len])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn reshape(self, dims: impl Into<Vec<usize>>) -> Result<Self> {
        Self::new(dims, self.data)
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scale(&self, alpha: f32) -> Self {
        self.map(|x| alpha * x)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Extents as `(n, c, h, w)`; fails unless the tensor is rank 4.
    pub fn nchw(&self, op: &'static str) -> Result<[usize; 4]> {
        match self.dims[..] {
            [n, c, h, w] => Ok([n, c, h, w]),
            _ => Err(TensorError::InvalidShape {
                op,
                reason: format!("expected a rank-4 NCHW tensor, got {:?}", self.dims),
            }),
        }
    }

    fn matrix(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.dims[..] {
            [m, n] => Ok((m, n)),
            _ => Err(TensorError::InvalidShape {
                op,
                reason: format!("expected a matrix, got {:?}", self.dims),
            }),
        }
    }

    /// Sample `i` of an NCHW batch as a `1×C×H×W` tensor.
    pub fn sample(&self, i: usize) -> Result<Tensor> {
        let [n, c, h, w] = self.nchw("sample")?;
        if i >= n {
            return Err(TensorError::InvalidShape {
                op: "sample",
                reason: format!("index {} out of range for batch of {}", i, n),
            });
        }
        let stride = c * h * w;
        Tensor::new(vec![1, c, h, w], self.data[i * stride..(i + 1) * stride].to_vec())
    }

    /// Concatenates `1×C×H×W` (or `N×C×H×W`) tensors along the batch axis.
    pub fn stack(parts: &[Tensor]) -> Result<Tensor> {
        let first = parts.first().ok_or_else(|| TensorError::InvalidShape {
            op: "stack",
            reason: "no tensors to stack".into(),
        })?;
        let [_, c, h, w] = first.nchw("stack")?;
        let mut n = 0;
        let mut data = Vec::with_capacity(parts.len() * first.len());
        for p in parts {
            let [pn, pc, ph, pw] = p.nchw("stack")?;
            if (pc, ph, pw) != (c, h, w) {
                return Err(TensorError::ShapeMismatch {
                    op: "stack",
                    lhs: first.dims.clone(),
                    rhs: p.dims.clone(),
                });
            }
            n += pn;
            data.extend_from_slice(&p.data);
        }
        Tensor::new(vec![n, c, h, w], data)
    }
}

/// Output extent of a sliding window, `floor((size + 2·pad − kernel)/stride) + 1`.
///
/// Fails when the window does not fit in the padded input at all.
pub fn window_extent(
    op: &'static str,
    size: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
) -> Result<usize> {
    if kernel == 0 || stride == 0 {
        return Err(TensorError::InvalidShape {
            op,
            reason: format!("kernel ({}) and stride ({}) must be positive", kernel, stride),
        });
    }
    let padded = size + 2 * pad;
    if padded < kernel {
        return Err(TensorError::InvalidShape {
            op,
            reason: format!(
                "kernel {} does not fit input {} with padding {}",
                kernel, size, pad
            ),
        });
    }
    Ok((padded - kernel) / stride + 1)
}

// Rows and columns of the register tile in the GEMM micro-kernel.
const MR: usize = 4;
const NR: usize = 8;

/// `c = a · b` for row-major `a` (m×k) and `b` (k×n), writing into `c` (m×n).
///
/// Every output element is accumulated in `f32`, starting from zero, over
/// ascending `k`. Tiling only changes which elements are computed together,
/// never the order of additions inside one element, so the result is the
/// same bit pattern as the naive triple loop.
pub(crate) fn gemm_into(a: &[f32], b: &[f32], c: &mut [f32], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let rows_per_task = 64.max(MR);
        if m > rows_per_task && rayon::current_num_threads() > 1 {
            c.par_chunks_mut(rows_per_task * n)
                .enumerate()
                .for_each(|(t, c_chunk)| {
                    let r0 = t * rows_per_task;
                    let rows = c_chunk.len() / n;
                    gemm_block(&a[r0 * k..(r0 + rows) * k], b, c_chunk, rows, k, n);
                });
            return;
        }
    }
    gemm_block(a, b, c, m, k, n);
}

fn gemm_block(a: &[f32], b: &[f32], c: &mut [f32], m: usize, k: usize, n: usize) {
    let mut packed = vec![0.0f32; k * NR];
    let full_cols = n - n % NR;
    for j0 in (0..full_cols).step_by(NR) {
        for kk in 0..k {
            packed[kk * NR..(kk + 1) * NR].copy_from_slice(&b[kk * n + j0..kk * n + j0 + NR]);
        }
        let full_rows = m - m % MR;
        for i0 in (0..full_rows).step_by(MR) {
            let mut acc = [[0.0f32; NR]; MR];
            let a0 = &a[i0 * k..(i0 + 1) * k];
            let a1 = &a[(i0 + 1) * k..(i0 + 2) * k];
            let a2 = &a[(i0 + 2) * k..(i0 + 3) * k];
            let a3 = &a[(i0 + 3) * k..(i0 + 4) * k];
            for (kk, brow) in packed.chunks_exact(NR).enumerate() {
                let av = [a0[kk], a1[kk], a2[kk], a3[kk]];
                for r in 0..MR {
                    for jj in 0..NR {
                        acc[r][jj] += av[r] * brow[jj];
                    }
                }
            }
            for (r, row) in acc.iter().enumerate() {
                c[(i0 + r) * n + j0..(i0 + r) * n + j0 + NR].copy_from_slice(row);
            }
        }
        for i in full_rows..m {
            let arow = &a[i * k..(i + 1) * k];
            let mut acc = [0.0f32; NR];
            for (kk, brow) in packed.chunks_exact(NR).enumerate() {
                for jj in 0..NR {
                    acc[jj] += arow[kk] * brow[jj];
                }
            }
            c[i * n + j0..i * n + j0 + NR].copy_from_slice(&acc);
        }
    }
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in full_cols..n {
            let mut acc = 0.0f32;
            for kk in 0..k {
                acc += arow[kk] * b[kk * n + j];
            }
            c[i * n + j] = acc;
        }
    }
}

/// Matrix product of two rank-2 tensors.
pub fn gemm(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = a.matrix("gemm")?;
    let (k2, n) = b.matrix("gemm")?;
    if k != k2 {
        return Err(TensorError::ShapeMismatch {
            op: "gemm",
            lhs: a.dims.clone(),
            rhs: b.dims.clone(),
        });
    }
    let mut c = vec![0.0; m * n];
    gemm_into(&a.data, &b.data, &mut c, m, k, n);
    Tensor::new(vec![m, n], c)
}

/// Geometry of a 2-D sliding window (square stride and padding).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Window {
    pub fn square(kernel: usize, stride: usize, pad: usize) -> Self {
        Self {
            kernel_h: kernel,
            kernel_w: kernel,
            stride,
            pad,
        }
    }

    pub fn output_extent(&self, op: &'static str, h: usize, w: usize) -> Result<(usize, usize)> {
        Ok((
            window_extent(op, h, self.kernel_h, self.stride, self.pad)?,
            window_extent(op, w, self.kernel_w, self.stride, self.pad)?,
        ))
    }
}

fn im2col_into(
    src: &[f32],
    c: usize,
    h: usize,
    w: usize,
    win: Window,
    out_h: usize,
    out_w: usize,
    cols: &mut [f32],
) {
    let spatial = out_h * out_w;
    let (kh, kw, s, pad) = (win.kernel_h, win.kernel_w, win.stride, win.pad as isize);
    for ch in 0..c {
        let plane = &src[ch * h * w..(ch + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = (ch * kh + ky) * kw + kx;
                let dst = &mut cols[row * spatial..(row + 1) * spatial];
                for p in 0..out_h {
                    let iy = (p * s + ky) as isize - pad;
                    let line = &mut dst[p * out_w..(p + 1) * out_w];
                    if iy < 0 || iy >= h as isize {
                        line.fill(0.0);
                        continue;
                    }
                    let src_row = &plane[iy as usize * w..(iy as usize + 1) * w];
                    for (q, v) in line.iter_mut().enumerate() {
                        let ix = (q * s + kx) as isize - pad;
                        *v = if ix < 0 || ix >= w as isize {
                            0.0
                        } else {
                            src_row[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Lowers a single `1×C×H×W` image to a `(C·kh·kw) × (H_out·W_out)` patch
/// matrix. Column `p·W_out + q` holds the receptive field of output `(p, q)`,
/// zero-filled wherever the window overlaps padding.
pub fn im2col(input: &Tensor, win: Window) -> Result<Tensor> {
    let [n, c, h, w] = input.nchw("im2col")?;
    if n != 1 {
        return Err(TensorError::InvalidShape {
            op: "im2col",
            reason: format!("expected a single image, got batch of {}", n),
        });
    }
    let (out_h, out_w) = win.output_extent("im2col", h, w)?;
    let rows = c * win.kernel_h * win.kernel_w;
    let mut cols = vec![0.0; rows * out_h * out_w];
    im2col_into(&input.data, c, h, w, win, out_h, out_w, &mut cols);
    Tensor::new(vec![rows, out_h * out_w], cols)
}

fn check_conv(
    op: &'static str,
    input: &Tensor,
    weights: &Tensor,
    bias: Option<&[f32]>,
) -> Result<([usize; 4], [usize; 4])> {
    let x = input.nchw(op)?;
    let f = weights.nchw(op)?;
    if x[1] != f[1] {
        return Err(TensorError::ShapeMismatch {
            op,
            lhs: input.dims.clone(),
            rhs: weights.dims.clone(),
        });
    }
    if let Some(b) = bias {
        if b.len() != f[0] {
            return Err(TensorError::ShapeMismatch {
                op,
                lhs: weights.dims.clone(),
                rhs: vec![b.len()],
            });
        }
    }
    Ok((x, f))
}

/// Convolution lowered to im2col + GEMM. `weights` is `F×C×kh×kw`; the
/// window's kernel size is taken from the weights.
pub fn conv2d(
    input: &Tensor,
    weights: &Tensor,
    bias: Option<&[f32]>,
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    let ([n, c, h, w], [f, _, kh, kw]) = check_conv("conv2d", input, weights, bias)?;
    let win = Window {
        kernel_h: kh,
        kernel_w: kw,
        stride,
        pad,
    };
    let (out_h, out_w) = win.output_extent("conv2d", h, w)?;
    let spatial = out_h * out_w;
    let depth = c * kh * kw;
    let pointwise = kh == 1 && kw == 1 && stride == 1 && pad == 0;
    let mut cols = if pointwise {
        Vec::new()
    } else {
        vec![0.0; depth * spatial]
    };
    let mut out = vec![0.0; n * f * spatial];
    for i in 0..n {
        let src = &input.data[i * c * h * w..(i + 1) * c * h * w];
        let dst = &mut out[i * f * spatial..(i + 1) * f * spatial];
        let lowered: &[f32] = if pointwise {
            src
        } else {
            im2col_into(src, c, h, w, win, out_h, out_w, &mut cols);
            &cols
        };
        gemm_into(&weights.data, lowered, dst, f, depth, spatial);
        if let Some(b) = bias {
            for (plane, &bv) in dst.chunks_exact_mut(spatial).zip(b) {
                plane.iter_mut().for_each(|v| *v += bv);
            }
        }
    }
    Tensor::new(vec![n, f, out_h, out_w], out)
}

/// Textbook nested-loop cross-correlation. Slow; kept as the reference the
/// GEMM path is checked against.
pub fn conv2d_direct(
    input: &Tensor,
    weights: &Tensor,
    bias: Option<&[f32]>,
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    let ([n, c, h, w], [f, _, kh, kw]) = check_conv("conv2d_direct", input, weights, bias)?;
    let out_h = window_extent("conv2d_direct", h, kh, stride, pad)?;
    let out_w = window_extent("conv2d_direct", w, kw, stride, pad)?;
    let x = &input.data;
    let wt = &weights.data;
    let mut out = vec![0.0f32; n * f * out_h * out_w];
    for b in 0..n {
        for o in 0..f {
            for p in 0..out_h {
                for q in 0..out_w {
                    let mut acc = 0.0f32;
                    for ch in 0..c {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (p * stride + ky) as isize - pad as isize;
                                let ix = (q * stride + kx) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                let xv = x[((b * c + ch) * h + iy as usize) * w + ix as usize];
                                let wv = wt[((o * c + ch) * kh + ky) * kw + kx];
                                acc += wv * xv;
                            }
                        }
                    }
                    if let Some(bias) = bias {
                        acc += bias[o];
                    }
                    out[((b * f + o) * out_h + p) * out_w + q] = acc;
                }
            }
        }
    }
    Tensor::new(vec![n, f, out_h, out_w], out)
}

pub fn relu(t: &Tensor) -> Tensor {
    t.map(|x| x.max(0.0))
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.dims != b.dims {
        return Err(TensorError::ShapeMismatch {
            op: "add",
            lhs: a.dims.clone(),
            rhs: b.dims.clone(),
        });
    }
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x + y).collect();
    Tensor::new(a.dims.clone(), data)
}

/// Window maximum; padded positions count as −∞ and are never selected.
pub fn maxpool2d(t: &Tensor, kernel: usize, stride: usize, pad: usize) -> Result<Tensor> {
    let [n, c, h, w] = t.nchw("maxpool2d")?;
    if pad >= kernel {
        return Err(TensorError::InvalidShape {
            op: "maxpool2d",
            reason: format!("padding {} must be smaller than kernel {}", pad, kernel),
        });
    }
    let out_h = window_extent("maxpool2d", h, kernel, stride, pad)?;
    let out_w = window_extent("maxpool2d", w, kernel, stride, pad)?;
    let mut out = Vec::with_capacity(n * c * out_h * out_w);
    for plane in t.data.chunks_exact(h * w) {
        for p in 0..out_h {
            let y0 = (p * stride) as isize - pad as isize;
            let ys = y0.max(0) as usize..((y0 + kernel as isize).min(h as isize)) as usize;
            for q in 0..out_w {
                let x0 = (q * stride) as isize - pad as isize;
                let xs = x0.max(0) as usize..((x0 + kernel as isize).min(w as isize)) as usize;
                let mut best = f32::NEG_INFINITY;
                for y in ys.clone() {
                    for &v in &plane[y * w + xs.start..y * w + xs.end] {
                        best = best.max(v);
                    }
                }
                out.push(best);
            }
        }
    }
    Tensor::new(vec![n, c, out_h, out_w], out)
}

/// Mean over the spatial extent of every channel; `N×C×H×W` to `N×C×1×1`.
pub fn global_avg_pool(t: &Tensor) -> Result<Tensor> {
    let [n, c, h, w] = t.nchw("global_avg_pool")?;
    let area = (h * w) as f64;
    let data = t
        .data
        .chunks_exact(h * w)
        .map(|plane| (plane.iter().map(|&v| v as f64).sum::<f64>() / area) as f32)
        .collect();
    Tensor::new(vec![n, c, 1, 1], data)
}

/// Per-channel affine map `x·scale[c] + shift[c]`, the pre-folded form of
/// inference-time batch normalisation.
pub fn batchnorm_inference(t: &Tensor, scale: &[f32], shift: &[f32]) -> Result<Tensor> {
    let [_, c, h, w] = t.nchw("batchnorm_inference")?;
    if scale.len() != c || shift.len() != c {
        return Err(TensorError::ShapeMismatch {
            op: "batchnorm_inference",
            lhs: t.dims.clone(),
            rhs: vec![scale.len(), shift.len()],
        });
    }
    let mut data = t.data.clone();
    for (i, plane) in data.chunks_exact_mut(h * w).enumerate() {
        let (s, b) = (scale[i % c], shift[i % c]);
        plane.iter_mut().for_each(|v| *v = *v * s + b);
    }
    Tensor::new(t.dims.clone(), data)
}

/// Folds batch-norm statistics into the affine form consumed by
/// [`batchnorm_inference`]: `scale = γ/√(σ²+ε)`, `shift = β − μ·scale`.
pub fn fold_batchnorm(
    gamma: &[f32],
    beta: &[f32],
    mean: &[f32],
    var: &[f32],
    eps: f32,
) -> (Vec<f32>, Vec<f32>) {
    let scale: Vec<f32> = gamma
        .iter()
        .zip(var)
        .map(|(&g, &v)| g / (v + eps).sqrt())
        .collect();
    let shift = beta
        .iter()
        .zip(mean)
        .zip(&scale)
        .map(|((&b, &m), &s)| b - m * s)
        .collect();
    (scale, shift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random(dims: &[usize], rng: &mut SplitMix64) -> Tensor {
        let len = dims.iter().product();
        let data = (0..len).map(|_| (rng.next_f64() * 2.0 - 1.0) as f32).collect();
        Tensor::new(dims.to_vec(), data).unwrap()
    }

    fn naive_gemm(a: &Tensor, b: &Tensor) -> Vec<f32> {
        let (m, k) = (a.dims[0], a.dims[1]);
        let n = b.dims[1];
        let mut c = vec![0.0f32; m * n];
        for i in 0..m {
            for j in 0..n {
                let mut s = 0.0f32;
                for kk in 0..k {
                    s += a.data[i * k + kk] * b.data[kk * n + j];
                }
                c[i * n + j] = s;
            }
        }
        c
    }

    #[test]
    fn tensor_rejects_bad_shapes() {
        assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());
        assert!(Tensor::new(vec![0, 2], vec![]).is_err());
        assert!(Tensor::new(vec![1, 1, 1, 1, 1], vec![0.0]).is_err());
        assert!(Tensor::new(Vec::<usize>::new(), vec![]).is_err());
    }

    #[test]
    fn gemm_identity() {
        let i2 = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let b = Tensor::new(vec![2, 2], vec![3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(gemm(&i2, &b).unwrap().data(), &[3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn gemm_row_times_column() {
        let a = Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::new(vec![2, 1], vec![3.0, 4.0]).unwrap();
        let c = gemm(&a, &b).unwrap();
        assert_eq!(c.dims(), &[1, 1]);
        assert_eq!(c.data(), &[11.0]);
    }

    #[test]
    fn gemm_matches_naive_and_is_bit_identical() {
        let mut rng = SplitMix64::new(17);
        for &(m, k, n) in &[(17, 13, 9), (4, 8, 8), (9, 31, 33), (1, 5, 1), (65, 7, 70)] {
            let a = random(&[m, k], &mut rng);
            let b = random(&[k, n], &mut rng);
            let c = gemm(&a, &b).unwrap();
            let oracle = naive_gemm(&a, &b);
            for (x, y) in c.data().iter().zip(&oracle) {
                assert!((x - y).abs() <= 1e-5);
                // Same accumulation order as the triple loop.
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn gemm_dimension_mismatch_names_both_shapes() {
        let a = Tensor::zeros(vec![2, 3]).unwrap();
        let b = Tensor::zeros(vec![4, 2]).unwrap();
        let err = gemm(&a, &b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[4, 2]"), "{}", msg);
    }

    #[test]
    fn im2col_pointwise_is_flattening() {
        let x = Tensor::new(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let cols = im2col(&x, Window::square(1, 1, 0)).unwrap();
        assert_eq!(cols.dims(), &[1, 4]);
        assert_eq!(cols.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn im2col_single_full_window() {
        let x = Tensor::filled(vec![1, 1, 3, 3], 5.0).unwrap();
        let cols = im2col(&x, Window::square(3, 1, 0)).unwrap();
        assert_eq!(cols.dims(), &[9, 1]);
        assert!(cols.data().iter().all(|&v| v == 5.0));
    }

    #[test]
    fn im2col_zero_fills_padding() {
        let x = Tensor::filled(vec![1, 1, 1, 1], 2.0).unwrap();
        let cols = im2col(&x, Window::square(3, 1, 1)).unwrap();
        assert_eq!(cols.dims(), &[9, 1]);
        let expected = [0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(cols.data(), &expected);
    }

    #[test]
    fn im2col_rejects_oversized_kernel() {
        let x = Tensor::zeros(vec![1, 1, 2, 2]).unwrap();
        assert!(im2col(&x, Window::square(5, 1, 0)).is_err());
    }

    #[test]
    fn lowered_conv_matches_direct_on_strided_padded_case() {
        let mut rng = SplitMix64::new(3);
        let x = random(&[1, 3, 8, 8], &mut rng);
        let w = random(&[4, 3, 3, 3], &mut rng);
        let bias: Vec<f32> = (0..4).map(|i| i as f32 * 0.1).collect();
        let fast = conv2d(&x, &w, Some(&bias), 2, 1).unwrap();
        let slow = conv2d_direct(&x, &w, Some(&bias), 2, 1).unwrap();
        assert_eq!(fast.dims(), &[1, 4, 4, 4]);
        assert_eq!(fast.dims(), slow.dims());
        for (a, b) in fast.data().iter().zip(slow.data()) {
            assert!((a - b).abs() <= 1e-5);
        }
    }

    #[test]
    fn direct_conv_identity_filter_and_window_sum() {
        let mut rng = SplitMix64::new(5);
        let x = random(&[1, 1, 4, 5], &mut rng);
        let one = Tensor::new(vec![1, 1, 1, 1], vec![1.0]).unwrap();
        assert_eq!(conv2d_direct(&x, &one, Some(&[0.0]), 1, 0).unwrap(), x);

        let ones = Tensor::filled(vec![1, 1, 3, 3], 1.0).unwrap();
        let k = Tensor::filled(vec![1, 1, 3, 3], 1.0).unwrap();
        let out = conv2d_direct(&ones, &k, None, 1, 0).unwrap();
        assert_eq!(out.data(), &[9.0]);
    }

    #[test]
    fn conv_channel_mismatch() {
        let x = Tensor::zeros(vec![1, 2, 4, 4]).unwrap();
        let w = Tensor::zeros(vec![1, 3, 3, 3]).unwrap();
        assert!(matches!(
            conv2d(&x, &w, None, 1, 0),
            Err(TensorError::ShapeMismatch { .. })
        ));
        assert!(conv2d_direct(&x, &w, None, 1, 0).is_err());
    }

    #[test]
    fn relu_definition() {
        let t = Tensor::new(vec![3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&t).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn add_requires_identical_dims() {
        let a = Tensor::zeros(vec![2, 2]).unwrap();
        let b = Tensor::zeros(vec![4]).unwrap();
        assert!(add(&a, &b).is_err());
        let c = Tensor::filled(vec![2, 2], 1.5).unwrap();
        assert_eq!(add(&c, &c).unwrap().data(), &[3.0; 4]);
    }

    #[test]
    fn global_avg_pool_mean() {
        let t = Tensor::new(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let p = global_avg_pool(&t).unwrap();
        assert_eq!(p.dims(), &[1, 1, 1, 1]);
        assert_eq!(p.data(), &[2.5]);
    }

    fn window_max_oracle(t: &Tensor, k: usize, s: usize, pad: usize) -> Vec<f32> {
        let [n, c, h, w] = t.nchw("oracle").unwrap();
        let oh = (h + 2 * pad - k) / s + 1;
        let ow = (w + 2 * pad - k) / s + 1;
        let mut out = Vec::new();
        for b in 0..n * c {
            for p in 0..oh {
                for q in 0..ow {
                    let mut vals = Vec::new();
                    for dy in 0..k {
                        for dx in 0..k {
                            let y = (p * s + dy) as isize - pad as isize;
                            let x = (q * s + dx) as isize - pad as isize;
                            if y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w {
                                vals.push(t.data()[b * h * w + y as usize * w + x as usize]);
                            }
                        }
                    }
                    out.push(vals.into_iter().fold(f32::NEG_INFINITY, f32::max));
                }
            }
        }
        out
    }

    #[test]
    fn maxpool_matches_window_max_oracle() {
        let mut rng = SplitMix64::new(11);
        let t = random(&[1, 1, 7, 7], &mut rng);
        let p = maxpool2d(&t, 3, 2, 1).unwrap();
        assert_eq!(p.dims(), &[1, 1, 4, 4]);
        assert_eq!(p.data(), window_max_oracle(&t, 3, 2, 1).as_slice());

        // Stem geometry of the network: floor semantics, 112 -> 56.
        let t = random(&[1, 2, 112, 112], &mut rng);
        let p = maxpool2d(&t, 3, 2, 1).unwrap();
        assert_eq!(p.dims(), &[1, 2, 56, 56]);
        assert_eq!(p.data(), window_max_oracle(&t, 3, 2, 1).as_slice());
    }

    #[test]
    fn maxpool_never_selects_padding() {
        let t = Tensor::filled(vec![1, 1, 3, 3], -7.0).unwrap();
        let p = maxpool2d(&t, 3, 2, 1).unwrap();
        assert!(p.data().iter().all(|&v| v == -7.0));
    }

    #[test]
    fn batchnorm_is_per_channel_affine() {
        let t = Tensor::new(vec![1, 2, 1, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let out = batchnorm_inference(&t, &[2.0, -1.0], &[0.5, 1.0]).unwrap();
        assert_eq!(out.data(), &[2.5, 4.5, -2.0, -3.0]);
        assert!(batchnorm_inference(&t, &[1.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn folded_batchnorm_matches_unfolded_formula() {
        let (gamma, beta, mean, var) = ([1.5f32, 0.5], [0.1f32, -0.2], [0.3f32, 2.0], [4.0f32, 0.25]);
        let eps = 1e-5;
        let (scale, shift) = fold_batchnorm(&gamma, &beta, &mean, &var, eps);
        let t = Tensor::new(vec![1, 2, 1, 1], vec![0.7, -1.1]).unwrap();
        let folded = batchnorm_inference(&t, &scale, &shift).unwrap();
        for c in 0..2 {
            let x = t.data()[c];
            let expected = gamma[c] * (x - mean[c]) / (var[c] + eps).sqrt() + beta[c];
            assert!((folded.data()[c] - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn stack_and_sample_round_trip() {
        let mut rng = SplitMix64::new(2);
        let a = random(&[1, 2, 3, 3], &mut rng);
        let b = random(&[1, 2, 3, 3], &mut rng);
        let s = Tensor::stack(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(s.dims(), &[2, 2, 3, 3]);
        assert_eq!(s.sample(0).unwrap(), a);
        assert_eq!(s.sample(1).unwrap(), b);
        assert!(s.sample(2).is_err());
    }
}
