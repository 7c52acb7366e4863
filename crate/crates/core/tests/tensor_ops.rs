use cxr_core::tensor::{self, conv2d, conv2d_direct, gemm, global_avg_pool, maxpool2d, relu, Tensor};
use cxr_testkit::naive_conv2d;
use proptest::prelude::*;

fn values(len: usize) -> impl Strategy<Value = Vec<f32>> {
    prop::collection::vec(-2.0f32..2.0, len)
}

#[derive(Debug, Clone)]
struct ConvCase {
    input: Tensor,
    weights: Tensor,
    stride: usize,
    pad: usize,
}

fn conv_case() -> impl Strategy<Value = ConvCase> {
    (1usize..=2, 1usize..=4, 1usize..=4, 1usize..=16, 1usize..=16, 1usize..=3, 1usize..=3, 0usize..=2)
        .prop_filter("kernel fits", |&(_, _, _, h, w, k, _, p)| h + 2 * p >= k && w + 2 * p >= k)
        .prop_flat_map(|(n, c, o, h, w, k, s, p)| {
            (values(n * c * h * w), values(o * c * k * k)).prop_map(move |(x, wt)| ConvCase {
                input: Tensor::new(vec![n, c, h, w], x).unwrap(),
                weights: Tensor::new(vec![o, c, k, k], wt).unwrap(),
                stride: s,
                pad: p,
            })
        })
}

fn dims4(t: &Tensor) -> [usize; 4] {
    t.dims().try_into().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn im2col_conv_matches_nested_loops(case in conv_case()) {
        let fast = conv2d(&case.input, &case.weights, None, case.stride, case.pad).unwrap();
        let (dims, slow) = naive_conv2d(
            case.input.data(), dims4(&case.input), case.weights.data(), dims4(&case.weights), case.stride, case.pad,
        );
        prop_assert_eq!(fast.dims(), &dims[..]);
        for (a, b) in fast.data().iter().zip(&slow) {
            prop_assert!((a - b).abs() <= 1e-5, "{} vs {}", a, b);
        }
        let direct = conv2d_direct(&case.input, &case.weights, None, case.stride, case.pad).unwrap();
        prop_assert_eq!(direct.dims(), fast.dims());
    }

    #[test]
    fn gemm_is_bilinear(
        (m, k, n) in (1usize..6, 1usize..6, 1usize..6),
        seed in any::<u64>(),
        alpha in -3.0f32..3.0,
    ) {
        let mut rng = cxr_testkit::TestRng::new(seed);
        let mut mat = |r: usize, c: usize| {
            Tensor::new(vec![r, c], (0..r * c).map(|_| rng.uniform(-1.0, 1.0) as f32).collect()).unwrap()
        };
        let (a1, a2, b) = (mat(m, k), mat(m, k), mat(k, n));
        let sum = tensor::add(&a1, &a2).unwrap();
        let lhs = gemm(&sum, &b).unwrap();
        let rhs = tensor::add(&gemm(&a1, &b).unwrap(), &gemm(&a2, &b).unwrap()).unwrap();
        for (x, y) in lhs.data().iter().zip(rhs.data()) {
            prop_assert!((x - y).abs() <= 1e-5);
        }
        let scaled = gemm(&a1.scale(alpha), &b).unwrap();
        let expect = gemm(&a1, &b).unwrap().scale(alpha);
        for (x, y) in scaled.data().iter().zip(expect.data()) {
            prop_assert!((x - y).abs() <= 1e-5 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn relu_is_idempotent_and_nonnegative(v in values(64)) {
        let t = Tensor::new(vec![1, 1, 8, 8], v).unwrap();
        let once = relu(&t);
        prop_assert_eq!(relu(&once), once.clone());
        prop_assert!(once.data().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn average_pool_times_area_is_the_plane_sum((c, h, w) in (1usize..4, 1usize..9, 1usize..9), seed in any::<u64>()) {
        let mut rng = cxr_testkit::TestRng::new(seed);
        let data: Vec<f32> = (0..c * h * w).map(|_| rng.uniform(-5.0, 5.0) as f32).collect();
        let t = Tensor::new(vec![1, c, h, w], data.clone()).unwrap();
        let pooled = global_avg_pool(&t).unwrap();
        prop_assert_eq!(pooled.dims(), &[1, c, 1, 1][..]);
        for (ch, plane) in data.chunks(h * w).enumerate() {
            let sum: f64 = plane.iter().map(|&v| v as f64).sum();
            prop_assert!((pooled.data()[ch] as f64 * (h * w) as f64 - sum).abs() <= 1e-4 * (1.0 + sum.abs()));
        }
    }

    #[test]
    fn maxpool_dominates_its_window(v in values(100)) {
        let t = Tensor::new(vec![1, 1, 10, 10], v.clone()).unwrap();
        let p = maxpool2d(&t, 3, 2, 1).unwrap();
        prop_assert_eq!(p.dims(), &[1, 1, 5, 5][..]);
        for oy in 0usize..5 {
            for ox in 0usize..5 {
                let mut best = f32::NEG_INFINITY;
                for y in (2 * oy).saturating_sub(1)..(2 * oy + 2).min(10) {
                    for x in (2 * ox).saturating_sub(1)..(2 * ox + 2).min(10) {
                        best = best.max(v[y * 10 + x]);
                    }
                }
                prop_assert_eq!(p.data()[oy * 5 + ox], best);
            }
        }
    }
}

#[test]
fn conv_bias_is_added_per_channel() {
    let x = Tensor::filled(vec![1, 2, 3, 3], 1.0).unwrap();
    let w = Tensor::filled(vec![2, 2, 1, 1], 0.5).unwrap();
    let y = conv2d(&x, &w, Some(&[10.0, -10.0]), 1, 0).unwrap();
    assert!(y.data()[..9].iter().all(|&v| v == 11.0));
    assert!(y.data()[9..].iter().all(|&v| v == -9.0));
}
