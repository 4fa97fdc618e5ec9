mod common;

use nnefx::frontend::{decode_tensor, encode_tensor};
use nnefx::tensor::{
    concat, conv, infer_shapes, linear, max_pool, pad, pool, relu, reshape, softmax, split,
    PaddingSpec, PoolSpec, MIN_F,
};
use nnefx::{evaluate, Tensor, WeightStore};
use proptest::prelude::*;

fn tensor_strategy(c: usize, h: usize, w: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-10.0f32..10.0, c * h * w)
        .prop_map(move |d| Tensor::new(vec![1, c, h, w], d).unwrap())
}

fn image() -> impl Strategy<Value = Tensor> {
    (1usize..4, 1usize..9, 1usize..9).prop_flat_map(|(c, h, w)| tensor_strategy(c, h, w))
}

proptest! {
    #[test]
    fn max_pool_is_pool_of_min_padding(
        x in image(),
        kh in 1usize..4, kw in 1usize..4, sh in 1usize..4, sw in 1usize..4,
        pads in (0usize..3, 0usize..3, 0usize..3, 0usize..3),
    ) {
        let (t, b, l, r) = pads;
        let (h, w) = (x.shape()[2], x.shape()[3]);
        prop_assume!(kh <= h + t + b && kw <= w + l + r);
        let direct = max_pool(
            &x,
            &[1, 1, kh as i64, kw as i64],
            &[1, 1, sh as i64, sw as i64],
            &[1, 1, 1, 1],
            &[(0, 0), (0, 0), (t as i64, b as i64), (l as i64, r as i64)],
            "ignore",
        ).unwrap();
        let padded = pad(&x, &PaddingSpec::new(t, b, l, r, MIN_F)).unwrap();
        let composed = pool(&padded, &PoolSpec::new(kh, kw, sh, sw)).unwrap();
        prop_assert!(direct.bit_eq(&composed));
        prop_assert_eq!(direct.shape()[2], (h + t + b - kh) / sh + 1);
        prop_assert_eq!(direct.shape()[3], (w + l + r - kw) / sw + 1);
    }

    #[test]
    fn conv_shape_law(
        x in image(),
        oc in 1usize..4, kh in 1usize..4, kw in 1usize..4, s in 1usize..3, p in 0usize..2,
    ) {
        let (c, h, w) = (x.shape()[1], x.shape()[2], x.shape()[3]);
        prop_assume!(kh <= h + 2 * p && kw <= w + 2 * p);
        let k = Tensor::filled(&[oc, c, kh, kw], 0.5);
        let b = Tensor::zeros(&[1, oc]);
        let y = conv(&x, &k, &b, &[s as i64, s as i64], &[1, 1], &[(p as i64, p as i64), (p as i64, p as i64)], 1).unwrap();
        prop_assert_eq!(y.shape(), &[1, oc, (h + 2 * p - kh) / s + 1, (w + 2 * p - kw) / s + 1][..]);
    }

    #[test]
    fn softmax_sums_to_one(v in prop::collection::vec(-20.0f32..20.0, 1..40)) {
        let n = v.len();
        let y = softmax(&Tensor::new(vec![1, n], v).unwrap(), 1).unwrap();
        let sum: f64 = y.data().iter().map(|&p| p as f64).sum();
        prop_assert!((sum - 1.0).abs() < 1e-5);
        prop_assert!(y.data().iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn reshape_keeps_data(x in image()) {
        let n = x.len() as i64;
        let y = reshape(&x, &[1, n]).unwrap();
        prop_assert_eq!(y.data(), x.data());
        prop_assert_eq!(y.shape(), &[1, n as usize][..]);
    }

    #[test]
    fn split_then_concat_is_identity(x in image(), cut in 0.0f64..1.0) {
        let h = x.shape()[2] as i64;
        prop_assume!(h >= 2);
        let m = 1 + ((h - 1) as f64 * cut) as i64;
        let m = m.min(h - 1);
        let parts = split(&x, 2, &[(0, m), (m, h)]).unwrap();
        prop_assert_eq!(parts.len(), 2);
        let back = concat(&[&parts[0], &parts[1]], 2).unwrap();
        prop_assert!(back.bit_eq(&x));
    }

    #[test]
    fn relu_is_nonnegative_and_idempotent(x in image()) {
        let y = relu(&x);
        prop_assert!(y.data().iter().all(|&v| v >= 0.0));
        prop_assert!(relu(&y).bit_eq(&y));
    }

    #[test]
    fn tensor_codec_round_trip(x in image()) {
        let back = decode_tensor(&encode_tensor(&x)).unwrap();
        prop_assert!(back.bit_eq(&x));
    }
}

#[test]
fn conv_matches_float64_oracle() {
    let mut rng = common::rng(7);
    for case in 0..50 {
        let (c, h, w) = (3, 6 + case % 5, 5 + case % 7);
        let (oc, kh, kw) = (1 + case % 4, 1 + case % 3, 1 + (case / 3) % 3);
        let (s, p) = (1 + case % 2, case % 2);
        let x = common::random_tensor(&mut rng, &[1, c, h, w]);
        let k = common::random_tensor(&mut rng, &[oc, c, kh, kw]);
        let b = common::random_tensor(&mut rng, &[1, oc]);
        let pi = p as i64;
        let y = conv(
            &x,
            &k,
            &b,
            &[s as i64, s as i64],
            &[1, 1],
            &[(pi, pi), (pi, pi)],
            1,
        )
        .unwrap();
        let want = common::conv_oracle(&x, &k, &b, (s, s), (p, p, p, p));
        assert_eq!(y.len(), want.len());
        for (got, want) in y.data().iter().zip(&want) {
            let err = (*got as f64 - want).abs() / want.abs().max(1.0);
            assert!(err < 1e-6, "case {case}: {got} vs {want}");
        }
    }
}

#[test]
fn linear_matches_hand_computation() {
    let x = Tensor::new(vec![1, 3], vec![1.0, 2.0, 3.0]).unwrap();
    let w = Tensor::new(vec![2, 3], vec![1.0, 0.0, -1.0, 0.5, 0.5, 0.5]).unwrap();
    let b = Tensor::new(vec![1, 2], vec![10.0, 0.0]).unwrap();
    assert_eq!(linear(&x, &w, &b).unwrap().data(), &[8.0, 3.0]);
}

#[test]
fn zero_weight_lenet_gives_uniform_softmax() {
    let p = common::corpus("lenet");
    let (inputs, random) = common::random_instance(&p, 1);
    let mut weights = WeightStore::new();
    for (label, t) in random.iter() {
        weights.insert(label, Tensor::zeros(t.shape()));
    }
    let out = &evaluate(&p, &inputs, &weights).unwrap()["out"];
    assert_eq!(out.shape(), &[1, 10]);
    assert!(out.data().iter().all(|&v| v == 0.1));
}

#[test]
fn corpus_shapes_infer_and_evaluate() {
    for name in common::CORPUS {
        let p = common::corpus(name);
        let shapes = infer_shapes(&p).unwrap();
        let (inputs, weights) = common::random_instance(&p, 3);
        let outs = evaluate(&p, &inputs, &weights).unwrap();
        for (name, t) in &outs {
            assert_eq!(shapes[name].as_slice(), t.shape(), "{name}");
        }
    }
}
