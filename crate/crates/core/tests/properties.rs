mod common;

use common::*;
use ftnet::data::{gmm_sample, GmmSpec};
use ftnet::gan::{mode_coverage, rng_stream};
use ftnet::network::LossFunction;
use ftnet::{
    fold, mode_product, multi_mode_product, param_count_tensor, unfold, Activation, DenseLayer, DenseTensor, Layer,
    Matrix, Network, Shape, TensorLayer,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dims_strategy(max_order: usize, max_extent: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1..=max_extent, 1..=max_order)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fold_inverts_unfold(dims in dims_strategy(4, 4), seed in any::<u64>(), mode_pick in any::<usize>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_tensor(&dims, &mut rng);
        let mode = mode_pick % dims.len();
        let m = unfold(&t, mode).unwrap();
        prop_assert_eq!(&m, &naive_unfold(&t, mode));
        prop_assert_eq!(fold(&m, mode, t.shape()).unwrap(), t);
    }

    #[test]
    fn mode_product_matches_summation(dims in dims_strategy(3, 4), rows in 1usize..5, seed in any::<u64>(), mode_pick in any::<usize>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_tensor(&dims, &mut rng);
        let mode = mode_pick % dims.len();
        let u = random_matrix(rows, dims[mode], &mut rng);
        let fast = mode_product(&t, &u, mode).unwrap();
        let slow = naive_mode_product(&t, &u, mode);
        prop_assert_eq!(fast.dims(), slow.dims());
        prop_assert!(max_abs_diff(fast.data(), slow.data()) <= 1e-12);
    }

    #[test]
    fn products_on_distinct_modes_commute(dims in prop::collection::vec(1usize..5, 2..=4), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_tensor(&dims, &mut rng);
        let a = random_matrix(3, dims[0], &mut rng);
        let b = random_matrix(2, dims[1], &mut rng);
        let ab = mode_product(&mode_product(&t, &a, 0).unwrap(), &b, 1).unwrap();
        let ba = mode_product(&mode_product(&t, &b, 1).unwrap(), &a, 0).unwrap();
        prop_assert!(max_abs_diff(ab.data(), ba.data()) <= 1e-12);
    }

    #[test]
    fn same_mode_products_compose(dims in dims_strategy(3, 4), seed in any::<u64>(), mode_pick in any::<usize>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_tensor(&dims, &mut rng);
        let mode = mode_pick % dims.len();
        let a = random_matrix(3, dims[mode], &mut rng);
        let b = random_matrix(2, 3, &mut rng);
        let seq = mode_product(&mode_product(&t, &a, mode).unwrap(), &b, mode).unwrap();
        let once = mode_product(&t, &b.matmul(&a).unwrap(), mode).unwrap();
        prop_assert!(max_abs_diff(seq.data(), once.data()) <= 1e-12);
    }

    #[test]
    fn kronecker_identity(dims in prop::collection::vec(1usize..4, 2..=3), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_tensor(&dims, &mut rng);
        let factors: Vec<Matrix> = dims.iter().map(|&d| random_matrix(d % 3 + 1, d, &mut rng)).collect();
        let pairs: Vec<(&Matrix, usize)> = factors.iter().zip(0..).collect();
        let y = multi_mode_product(&t, &pairs).unwrap();
        for n in 0..dims.len() {
            let lhs = unfold(&y, n).unwrap();
            let rhs = kronecker_path(&t, &factors, n);
            prop_assert!(relative_frobenius(lhs.data(), rhs.data()) <= 1e-10);
        }
    }

    #[test]
    fn identity_layer_is_affine(dims in prop::collection::vec(1usize..4, 1..=3), seed in any::<u64>(), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out: Vec<usize> = dims.iter().map(|d| d % 3 + 1).collect();
        let layer = TensorLayer::init(&dims, &out, Activation::Identity, &mut rng).unwrap();
        let mut with_batch = dims.clone();
        with_batch.push(2);
        let x = random_tensor(&with_batch, &mut rng);
        let y = random_tensor(&with_batch, &mut rng);
        let combo = x.zip_map(&y, |p, q| a * p + b * q).unwrap();
        // With a zero bias the layer is linear.
        let lhs = layer.infer(&combo).unwrap();
        let rhs = layer.infer(&x).unwrap().zip_map(&layer.infer(&y).unwrap(), |p, q| a * p + b * q).unwrap();
        prop_assert!(max_abs_diff(lhs.data(), rhs.data()) <= 1e-12);
    }

    #[test]
    fn built_layers_match_count_formula(input in prop::collection::vec(1usize..6, 1..=3), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hidden: Vec<usize> = input.iter().map(|d| (d * 7) % 5 + 1).collect();
        let output = vec![1; input.len()];
        let a = TensorLayer::init(&input, &hidden, Activation::Tanh, &mut rng).unwrap();
        let b = TensorLayer::init(&hidden, &output, Activation::Identity, &mut rng).unwrap();
        prop_assert_eq!(a.num_params() + b.num_params(), param_count_tensor(&input, &hidden, &output).unwrap());
    }

    #[test]
    fn bce_is_nonnegative(logits in prop::collection::vec(-50.0..50.0f64, 1..20), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = logits.len();
        let l = DenseTensor::from_vec(vec![1, n], logits).unwrap();
        let t = random_tensor(&[1, n], &mut rng).map(|v| v.abs());
        let (loss, grad) = LossFunction::BceLogits.loss_and_grad(&l, Some(&t)).unwrap();
        prop_assert!(loss >= -1e-12);
        // Each gradient entry is (σ(ℓ) - t)/n with both terms in [0, 1].
        prop_assert!(grad.data().iter().all(|g| g.abs() <= 1.0 / n as f64 + 1e-15));
    }

    #[test]
    fn coverage_is_bounded(n in 1usize..400, seed in any::<u64>()) {
        let spec = GmmSpec { points: n, ..GmmSpec::separated() };
        let ds = gmm_sample(&spec, &mut rng_stream(seed, 1)).unwrap();
        let c = mode_coverage(&ds.points().unwrap(), &spec.means(), 0.2).unwrap();
        prop_assert!(c.covered <= 6);
        prop_assert!(c.histogram.iter().sum::<usize>() <= n);
    }

    #[test]
    fn order_one_tensor_layer_is_a_dense_layer(i in 1usize..8, j in 1usize..8, c in 1usize..4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_matrix(j, i, &mut rng);
        let bias = random_tensor(&[j], &mut rng);
        let t = TensorLayer::new(vec![w.clone()], bias.clone(), Activation::Sigmoid).unwrap();
        let d = DenseLayer::new(w, bias.data().to_vec(), Activation::Sigmoid).unwrap();
        let x = random_tensor(&[i, c], &mut rng);
        let tn = Network::new(vec![Layer::from(t)]).unwrap();
        let dn = Network::new(vec![Layer::from(d)]).unwrap();
        prop_assert!(max_abs_diff(tn.infer(&x).unwrap().data(), dn.infer(&x).unwrap().data()) <= 1e-12);
    }
}

#[test]
fn shape_overflow_is_a_capacity_error() {
    assert!(matches!(Shape::new(vec![usize::MAX, 2]), Err(ftnet::Error::Capacity(_))));
}
