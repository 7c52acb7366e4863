use cxr_core::resnet::{build_resnet50, extract_features, ConvBn, LabeledImage, ModelWeights, ResNet50Graph};
use cxr_core::tensor::{self, Tensor};
use cxr_testkit::{naive_conv2d, TestRng};

fn image(seed: u64) -> Tensor {
    let mut rng = TestRng::new(seed);
    Tensor::new(vec![1, 3, 224, 224], (0..3 * 224 * 224).map(|_| rng.gaussian() as f32).collect()).unwrap()
}

fn conv_bn(spec: &ConvBn, w: &ModelWeights, x: &Tensor) -> Tensor {
    let y = tensor::conv2d(x, w.get(&spec.weight_name()), None, spec.stride, spec.pad).unwrap();
    tensor::batchnorm_inference(&y, w.get(&spec.scale_name()).data(), w.get(&spec.shift_name()).data()).unwrap()
}

/// The network spelled out one tensor op at a time.
fn reference(g: &ResNet50Graph, w: &ModelWeights, x: &Tensor) -> Vec<f32> {
    let mut x = tensor::relu(&conv_bn(&g.stem, w, x));
    x = tensor::maxpool2d(&x, g.pool_kernel, g.pool_stride, g.pool_pad).unwrap();
    for stage in &g.stages {
        for b in stage {
            let y = tensor::relu(&conv_bn(&b.conv1, w, &x));
            let y = tensor::relu(&conv_bn(&b.conv2, w, &y));
            let y = conv_bn(&b.conv3, w, &y);
            let short = b.downsample.as_ref().map_or_else(|| x.clone(), |d| conv_bn(d, w, &x));
            x = tensor::relu(&tensor::add(&y, &short).unwrap());
        }
    }
    let pooled = tensor::global_avg_pool(&x).unwrap().reshape(vec![1, g.fc_in]).unwrap();
    let fc_t = Tensor::new(
        vec![g.fc_in, g.fc_out],
        {
            let fw = w.get("fc.weight").data();
            let mut t = vec![0.0; fw.len()];
            for o in 0..g.fc_out {
                for i in 0..g.fc_in {
                    t[i * g.fc_out + o] = fw[o * g.fc_in + i];
                }
            }
            t
        },
    )
    .unwrap();
    let logits = tensor::gemm(&pooled, &fc_t).unwrap();
    logits.data().iter().zip(w.get("fc.bias").data()).map(|(a, b)| a + b).collect()
}

#[test]
fn forward_matches_layer_by_layer_composition() {
    let g = build_resnet50();
    let w = ModelWeights::random(&g, 17);
    let x = image(1);
    let out = g.forward(&w, &x).unwrap();
    let expect = reference(&g, &w, &x);
    assert_eq!(out.dims(), &[1, 1000]);
    for (a, b) in out.data().iter().zip(&expect) {
        assert!((a - b).abs() <= 1e-4, "{a} vs {b}");
    }
}

#[test]
fn stem_conv_matches_nested_loops_at_full_size() {
    let g = build_resnet50();
    let w = ModelWeights::random(&g, 5);
    let x = image(2);
    let y = tensor::conv2d(&x, w.get(&g.stem.weight_name()), None, 2, 3).unwrap();
    let wt = w.get(&g.stem.weight_name());
    let (dims, slow) = naive_conv2d(x.data(), [1, 3, 224, 224], wt.data(), [64, 3, 7, 7], 2, 3);
    assert_eq!(dims, [1, 64, 112, 112]);
    let worst = y.data().iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
    assert!(worst <= 1e-4, "{worst}");
}

#[test]
fn random_batch_is_finite_and_batching_invariant() {
    let g = build_resnet50();
    let w = ModelWeights::random(&g, 3);
    let images: Vec<LabeledImage> = (0..3)
        .map(|i| LabeledImage {
            id: format!("img{i}"),
            label: i % 3,
            tensor: image(10 + i as u64),
        })
        .collect();
    let one = extract_features(&g, &w, images.clone(), 1).unwrap();
    let all = extract_features(&g, &w, images, 8).unwrap();
    assert_eq!(one, all);
    assert_eq!((all.n_rows(), all.dim()), (3, 1000));
    assert!(all.data().iter().all(|v| v.is_finite()));
    assert_eq!(all.ids(), &["img0", "img1", "img2"]);
    // Repeated passes are bitwise identical.
    let batch = Tensor::stack(&[image(10), image(11)]).unwrap();
    let a = g.forward(&w, &batch).unwrap();
    assert_eq!(a, g.forward(&w, &batch).unwrap());
    assert_eq!(&a.data()[..1000], one.row(0));
}

#[test]
fn zero_network_outputs_the_fc_bias() {
    let g = build_resnet50();
    let w = ModelWeights::random(&g, 9).map(|name, t| if name == "fc.bias" { t.clone() } else { t.scale(0.0) });
    let out = g.forward(&w, &Tensor::stack(&[image(3), image(4)]).unwrap()).unwrap();
    let bias = w.get("fc.bias").data();
    assert_eq!(&out.data()[..1000], bias);
    assert_eq!(&out.data()[1000..], bias);
}

#[test]
fn full_manifest_round_trips_bitwise() {
    let g = build_resnet50();
    let w = ModelWeights::random(&g, 21);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.rnw");
    w.save(&g, &path).unwrap();
    let back = ModelWeights::load(&g, &path).unwrap();
    assert_eq!(back.len(), 161);
    for name in w.names() {
        let (a, b) = (w.get(name), back.get(name));
        assert_eq!(a.dims(), b.dims());
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()), "{name}");
    }
    assert_eq!(back.checksum, w.checksum);
}
