//! Sequential Minimal Optimization for the C-SVM dual
//!
//! ```text
//! min_α  ½ αᵀQα − eᵀα    s.t.  0 ≤ α_i ≤ C,  yᵀα = 0,   Q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! Working pairs are chosen by maximal violation: with gradient `G = Qα − e`,
//!
//! ```text
//! I_up  = { t : α_t < C, y_t = +1 } ∪ { t : α_t > 0, y_t = −1 }
//! I_low = { t : α_t < C, y_t = −1 } ∪ { t : α_t > 0, y_t = +1 }
//! i = argmax_{t ∈ I_up} −y_t G_t,   j = argmin_{t ∈ I_low} −y_t G_t
//! ```
//!
//! and the solver stops once `m − M = (−y_i G_i) − (−y_j G_j) ≤ tol`. The bias
//! is the mean of `−y_t G_t` over free variables (or the midpoint of the
//! feasible interval when none are free), which places it inside `[M, m]` and
//! makes every KKT condition hold to within `tol`.

use super::{dot, KernelSpec, Matrix, Result, SvmError};

/// Full symmetric kernel matrix over the training rows.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    n: usize,
    data: Vec<f64>,
}

impl KernelMatrix {
    /// Gram matrix of inner products; every kernel in this crate is a function
    /// of `x·z`, so one Gram matrix serves any kernel choice.
    pub fn gram(x: &Matrix) -> Self {
        let n = x.rows();
        let rows: Vec<usize> = (0..n).collect();
        let upper = crate::par_map(rows, |i| {
            (i..n).map(|j| dot(x.row(i), x.row(j))).collect::<Vec<f64>>()
        });
        let mut data = vec![0.0; n * n];
        for (i, row) in upper.into_iter().enumerate() {
            for (off, v) in row.into_iter().enumerate() {
                let j = i + off;
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Self { n, data }
    }

    pub fn from_gram(gram: &KernelMatrix, spec: &KernelSpec) -> Self {
        Self {
            n: gram.n,
            data: gram.data.iter().map(|&g| spec.from_dot(g)).collect(),
        }
    }

    pub fn new(x: &Matrix, spec: &KernelSpec) -> Self {
        Self::from_gram(&Self::gram(x), spec)
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = f(i, j);
            }
        }
        Self { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// A binary training problem with labels in `{−1, +1}`.
#[derive(Debug, Clone)]
pub struct BinaryProblem {
    x: Matrix,
    y: Vec<f64>,
    c: f64,
    tol: f64,
}

impl BinaryProblem {
    pub fn new(x: Matrix, y: Vec<f64>, c: f64, tol: f64) -> Result<Self> {
        validate(&y, c, tol)?;
        if x.rows() != y.len() {
            return Err(SvmError::Dimension {
                expected: x.rows(),
                got: y.len(),
            });
        }
        Ok(Self { x, y, c, tol })
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }
}

fn validate(y: &[f64], c: f64, tol: f64) -> Result<()> {
    if let Some(bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(SvmError::Problem(format!("labels must be ±1, found {}", bad)));
    }
    if !y.contains(&1.0) || !y.contains(&-1.0) {
        return Err(SvmError::Problem("both label signs must be present".into()));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(SvmError::Problem(format!("box constraint must be positive, got {}", c)));
    }
    if !(tol > 0.0) {
        return Err(SvmError::Problem(format!("tolerance must be positive, got {}", tol)));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    /// Dual objective `Σα − ½αᵀQα` (to be maximised).
    pub objective: f64,
    /// Final maximal violation `m − M`.
    pub violation: f64,
}

impl SmoSolution {
    /// `f(x_i) = Σ_j α_j y_j K_ij + b` for training row `i`.
    pub fn decision_on_train(&self, k: &KernelMatrix, y: &[f64], i: usize) -> f64 {
        let krow = k.row(i);
        let mut s = 0.0;
        for j in 0..y.len() {
            if self.alpha[j] != 0.0 {
                s += self.alpha[j] * y[j] * krow[j];
            }
        }
        s + self.bias
    }
}

/// `Σα − ½αᵀQα`.
pub fn dual_objective(k: &KernelMatrix, y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        let krow = k.row(i);
        let mut s = 0.0;
        for j in 0..n {
            s += alpha[j] * y[j] * krow[j];
        }
        quad += alpha[i] * y[i] * s;
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Trains on `p` with the default iteration cap.
pub fn smo_train(p: &BinaryProblem, spec: &KernelSpec) -> Result<SmoSolution> {
    let k = KernelMatrix::new(&p.x, spec);
    solve(&k, &p.y, p.c, p.tol, super::ovr::DEFAULT_MAX_ITERATIONS)
}

// Floor for a non-positive curvature along the working pair.
const TAU: f64 = 1e-12;

/// SMO on a precomputed kernel matrix.
pub fn solve(k: &KernelMatrix, y: &[f64], c: f64, tol: f64, max_iterations: usize) -> Result<SmoSolution> {
    validate(y, c, tol)?;
    let n = y.len();
    if k.len() != n {
        return Err(SvmError::Dimension {
            expected: n,
            got: k.len(),
        });
    }
    let mut alpha = vec![0.0f64; n];
    let mut grad = vec![-1.0f64; n];
    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt < 0.0 && a < c) || (yt > 0.0 && a > 0.0);

    let mut iterations = 0;
    let violation = loop {
        let mut i = usize::MAX;
        let mut j = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > gmax {
                gmax = v;
                i = t;
            }
            if in_low(alpha[t], y[t]) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        let gap = gmax - gmin;
        if i == usize::MAX || j == usize::MAX || gap <= tol {
            break gap.max(0.0);
        }
        if iterations >= max_iterations {
            let bias = bias_from_gradient(&alpha, &grad, y, c);
            return Err(SvmError::NotConverged {
                iterations,
                violation: gap,
                duality_gap: duality_gap(y, &alpha, &grad, bias, c),
            });
        }
        iterations += 1;

        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let (kii, kjj, kij) = (k.get(i, i), k.get(j, j), k.get(i, j));
        if y[i] != y[j] {
            // α_i − α_j stays fixed.
            let quad = (kii + kjj + 2.0 * y[i] * y[j] * kij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            // α_i + α_j stays fixed.
            let quad = (kii + kjj - 2.0 * y[i] * y[j] * kij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - ai_old, alpha[j] - aj_old);
        let (ki, kj) = (k.row(i), k.row(j));
        for t in 0..n {
            grad[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
        }
    };

    let bias = bias_from_gradient(&alpha, &grad, y, c);
    let objective = dual_objective(k, y, &alpha);
    Ok(SmoSolution {
        alpha,
        bias,
        iterations,
        objective,
        violation,
    })
}

fn bias_from_gradient(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut upper = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        (upper + lower) / 2.0
    };
    -rho
}

/// Primal minus dual objective at the current iterate.
fn duality_gap(y: &[f64], alpha: &[f64], grad: &[f64], bias: f64, c: f64) -> f64 {
    // (Qα)_t = G_t + 1 and y_t f(x_t) = (Qα)_t + y_t b.
    let quad: f64 = alpha.iter().zip(grad).map(|(a, g)| a * (g + 1.0)).sum();
    let hinge: f64 = grad
        .iter()
        .zip(y)
        .map(|(g, yt)| (1.0 - (g + 1.0 + yt * bias)).max(0.0))
        .sum();
    let primal = 0.5 * quad + c * hinge;
    let dual = alpha.iter().sum::<f64>() - 0.5 * quad;
    primal - dual
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(xs: &[[f64; 1]], ys: &[f64], c: f64) -> BinaryProblem {
        BinaryProblem::new(Matrix::from_rows(xs).unwrap(), ys.to_vec(), c, 1e-3).unwrap()
    }

    #[test]
    fn symmetric_two_point_problem() {
        let p = problem(&[[-1.0], [1.0]], &[-1.0, 1.0], 10.0);
        let sol = smo_train(&p, &KernelSpec::linear()).unwrap();
        assert!((sol.alpha[0] - 0.5).abs() < 1e-12);
        assert!((sol.alpha[1] - 0.5).abs() < 1e-12);
        assert!(sol.bias.abs() < 1e-12);
        let k = KernelMatrix::new(p.x(), &KernelSpec::linear());
        for (i, x) in [-1.0, 1.0].into_iter().enumerate() {
            assert!((sol.decision_on_train(&k, p.y(), i) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn flipping_labels_negates_the_decision() {
        let xs = [[-2.0], [-0.5], [0.3], [1.7], [2.2]];
        let ys = [-1.0, -1.0, 1.0, 1.0, 1.0];
        let flipped: Vec<f64> = ys.iter().map(|v| -v).collect();
        let kernel = KernelSpec::linear();
        let a = smo_train(&problem(&xs, &ys, 1.0), &kernel).unwrap();
        let b = smo_train(&problem(&xs, &flipped, 1.0), &kernel).unwrap();
        let k = KernelMatrix::new(&Matrix::from_rows(&xs).unwrap(), &kernel);
        for i in 0..xs.len() {
            let fa = a.decision_on_train(&k, &ys, i);
            let fb = b.decision_on_train(&k, &flipped, i);
            assert!((fa + fb).abs() < 1e-9, "{fa} vs {fb}");
        }
    }

    #[test]
    fn kkt_conditions_hold_within_tolerance() {
        let mut rng = crate::rng::SplitMix64::new(8);
        let n = 60;
        let rows: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                [s + rng.normal(), 0.5 * s + rng.normal()]
            })
            .collect();
        let y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        for kernel in [KernelSpec::linear(), KernelSpec::quadratic(2.0, 1.0).unwrap(), KernelSpec::cubic(2.0, 1.0).unwrap()] {
            for c in [0.1, 1.0, 10.0] {
                let tol = 1e-3;
                let k = KernelMatrix::new(&x, &kernel);
                let sol = solve(&k, &y, c, tol, 1_000_000).unwrap();
                let eq: f64 = sol.alpha.iter().zip(&y).map(|(a, yy)| a * yy).sum();
                assert!(eq.abs() <= 1e-6 * c * n as f64);
                for i in 0..n {
                    let a = sol.alpha[i];
                    assert!((0.0..=c).contains(&a));
                    let margin = y[i] * sol.decision_on_train(&k, &y, i);
                    if a == 0.0 {
                        assert!(margin >= 1.0 - tol - 1e-9, "{margin}");
                    } else if a == c {
                        assert!(margin <= 1.0 + tol + 1e-9, "{margin}");
                    } else {
                        assert!((margin - 1.0).abs() <= tol + 1e-9, "{margin}");
                    }
                }
            }
        }
    }

    #[test]
    fn iteration_cap_reports_violation() {
        let xs = [[-2.0], [-0.5], [0.3], [1.7], [2.2], [0.0]];
        let ys = [-1.0, 1.0, -1.0, 1.0, -1.0, 1.0];
        let p = problem(&xs, &ys, 100.0);
        let k = KernelMatrix::new(p.x(), &KernelSpec::linear());
        match solve(&k, p.y(), p.c(), 1e-9, 1) {
            Err(SvmError::NotConverged {
                iterations,
                violation,
                duality_gap,
            }) => {
                assert_eq!(iterations, 1);
                assert!(violation > 1e-9);
                assert!(duality_gap.is_finite());
            }
            other => panic!("expected non-convergence, got {:?}", other),
        }
    }

    #[test]
    fn invalid_problems() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(BinaryProblem::new(x.clone(), vec![1.0, 1.0], 1.0, 1e-3).is_err());
        assert!(BinaryProblem::new(x.clone(), vec![1.0, 0.0], 1.0, 1e-3).is_err());
        assert!(BinaryProblem::new(x.clone(), vec![1.0, -1.0], 0.0, 1e-3).is_err());
        assert!(BinaryProblem::new(x, vec![1.0, -1.0, 1.0], 1.0, 1e-3).is_err());
    }

    #[test]
    fn gram_matches_direct_kernel_evaluation() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]]).unwrap();
        let spec = KernelSpec::cubic(2.0, 1.0).unwrap();
        let k = KernelMatrix::new(&x, &spec);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(k.get(i, j), spec.eval(x.row(i), x.row(j)).unwrap());
                assert_eq!(k.get(i, j), k.get(j, i));
            }
        }
    }
}
