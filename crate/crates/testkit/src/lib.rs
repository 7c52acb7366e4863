//! Slow, obviously-correct reference implementations. These deliberately
//! share no code with `cxr-core` so tests can compare the two.

/// Result of [`qp_dual`].
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub alpha: Vec<f64>,
    /// `½ αᵀQα − Σα` at `alpha`.
    pub value: f64,
    /// Frank–Wolfe gap at `alpha`: `value − optimum ≤ gap`.
    pub gap: f64,
}

/// Minimises `½ αᵀQα − Σα` over `0 ≤ α ≤ C`, `yᵀα = 0` with accelerated
/// projected gradient (FISTA with gradient-based restart). `q` is the
/// row-major `n×n` matrix `y_i y_j K(x_i, x_j)`. Runs until the Frank–Wolfe
/// gap falls below `1e-12·(1 + |f|)` or the iteration budget is spent; the
/// gap is returned either way so callers can check the certificate.
pub fn qp_dual(q: &[f64], y: &[f64], c: f64) -> QpSolution {
    let n = y.len();
    assert_eq!(q.len(), n * n);
    // Gershgorin bound on the largest eigenvalue.
    let lipschitz = (0..n)
        .map(|i| q[i * n..(i + 1) * n].iter().map(|v| v.abs()).sum::<f64>())
        .fold(1e-12, f64::max);
    let step = 1.0 / lipschitz;
    let grad = |a: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| (0..n).map(|j| q[i * n + j] * a[j]).sum::<f64>() - 1.0)
            .collect()
    };
    let certify = |a: &[f64]| frank_wolfe_gap(&grad(a), a, y, c);

    let mut x = vec![0.0; n];
    let mut z = x.clone();
    let mut t = 1.0f64;
    for iter in 0..500_000 {
        if iter % 32 == 0 && certify(&x) <= 1e-12 * (1.0 + dual_value(q, &x).abs()) {
            break;
        }
        let g = grad(&z);
        let v: Vec<f64> = z.iter().zip(&g).map(|(a, g)| a - step * g).collect();
        let next = project(&v, y, c);
        // Restart when the momentum direction points uphill.
        let uphill: f64 = z.iter().zip(&next).zip(&x).map(|((z, n), x)| (z - n) * (n - x)).sum();
        if uphill > 0.0 {
            t = 1.0;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = next
            .iter()
            .zip(&x)
            .map(|(a, b)| a + (t - 1.0) / t_next * (a - b))
            .collect();
        x = next;
        t = t_next;
    }
    QpSolution {
        value: dual_value(q, &x),
        gap: certify(&x),
        alpha: x,
    }
}

/// `max_β ∇f·(α − β)` over the feasible set, which bounds `f(α) − f*` for
/// convex `f`. The inner linear program is solved greedily: `yᵀβ = 0` pairs
/// each unit of a positive-label coordinate with one of a negative-label
/// coordinate, so the cheapest pairs are filled first.
pub fn frank_wolfe_gap(grad: &[f64], alpha: &[f64], y: &[f64], c: f64) -> f64 {
    let mut pos: Vec<f64> = grad.iter().zip(y).filter(|(_, &y)| y > 0.0).map(|(g, _)| *g).collect();
    let mut neg: Vec<f64> = grad.iter().zip(y).filter(|(_, &y)| y < 0.0).map(|(g, _)| *g).collect();
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    let best: f64 = pos
        .iter()
        .zip(&neg)
        .map(|(a, b)| a + b)
        .take_while(|&s| s < 0.0)
        .map(|s| s * c)
        .sum();
    let at_alpha: f64 = grad.iter().zip(alpha).map(|(g, a)| g * a).sum();
    at_alpha - best
}

/// `½ αᵀQα − Σα`, the quantity [`qp_dual`] minimises.
pub fn dual_value(q: &[f64], alpha: &[f64]) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * q[i * n + j] * alpha[j];
        }
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}

/// Euclidean projection onto `{0 ≤ α ≤ C, yᵀα = 0}` for `y ∈ {±1}`.
/// The projection is `clip(v − λy)` with `λ` found by bisection on the
/// monotone function `λ ↦ yᵀ clip(v − λy)`.
pub fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let balance = |lambda: f64| -> f64 {
        v.iter().zip(y).map(|(vi, yi)| (vi - lambda * yi).clamp(0.0, c) * yi).sum()
    };
    let bound = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if balance(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    v.iter().zip(y).map(|(vi, yi)| (vi - lambda * yi).clamp(0.0, c)).collect()
}

/// Probability that a random positive outscores a random negative, ties
/// counted one half. Quadratic in the sample count.
pub fn mann_whitney_auc(scores: &[f64], is_positive: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0u64;
    for (i, &pi) in is_positive.iter().enumerate() {
        if !pi {
            continue;
        }
        for (j, &pj) in is_positive.iter().enumerate() {
            if pj {
                continue;
            }
            pairs += 1;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs as f64
}

/// `counts[t][p]`, counted separately for each of the `n²` cells.
pub fn brute_confusion(truth: &[usize], predicted: &[usize], n: usize) -> Vec<Vec<u64>> {
    (0..n)
        .map(|t| {
            (0..n)
                .map(|p| truth.iter().zip(predicted).filter(|&(&a, &b)| a == t && b == p).count() as u64)
                .collect()
        })
        .collect()
}

/// `(tp, fn, fp, tn)` for `class`, scanning the samples directly.
pub fn brute_one_vs_rest(truth: &[usize], predicted: &[usize], class: usize) -> (u64, u64, u64, u64) {
    let mut c = (0, 0, 0, 0);
    for (&t, &p) in truth.iter().zip(predicted) {
        match (t == class, p == class) {
            (true, true) => c.0 += 1,
            (true, false) => c.1 += 1,
            (false, true) => c.2 += 1,
            (false, false) => c.3 += 1,
        }
    }
    c
}

/// Nested-loop NCHW convolution with OIHW weights, zero padding and `f64`
/// accumulation. Returns the output extents and values.
pub fn naive_conv2d(
    input: &[f32],
    [n, c, h, w]: [usize; 4],
    weights: &[f32],
    [o, wc, kh, kw]: [usize; 4],
    stride: usize,
    pad: usize,
) -> ([usize; 4], Vec<f32>) {
    assert_eq!(c, wc);
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (w + 2 * pad - kw) / stride + 1;
    let mut out = vec![0.0f32; n * o * oh * ow];
    for b in 0..n {
        for oc in 0..o {
            for y in 0..oh {
                for x in 0..ow {
                    let mut acc = 0.0f64;
                    for ic in 0..c {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (y * stride + ky) as isize - pad as isize;
                                let ix = (x * stride + kx) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                let iv = input[((b * c + ic) * h + iy as usize) * w + ix as usize];
                                let wv = weights[((oc * c + ic) * kh + ky) * kw + kx];
                                acc += iv as f64 * wv as f64;
                            }
                        }
                    }
                    out[((b * o + oc) * oh + y) * ow + x] = acc as f32;
                }
            }
        }
    }
    ([n, o, oh, ow], out)
}

/// SplitMix64, kept separate from the core generator so test inputs do not
/// depend on it.
#[derive(Debug, Clone)]
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform integer in `lo..=hi`.
    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.next_u64() % (hi - lo + 1) as u64) as usize
    }

    pub fn gaussian(&mut self) -> f64 {
        let u = self.uniform(f64::MIN_POSITIVE, 1.0);
        let v = self.uniform(0.0, 1.0);
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    }
}
