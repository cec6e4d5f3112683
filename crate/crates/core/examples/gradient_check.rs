//! Checks the hand-derived gradients of a small FT-Net against central
//! differences and prints the per-block table.

use ftnet::gan::rng_stream;
use ftnet::network::{grad_check, LossFunction};
use ftnet::{Activation, DenseTensor, Network, Shape, TensorLayer};
use rand::Rng;

fn main() -> ftnet::Result<()> {
    let mut rng = rng_stream(0, 0);
    let net = Network::new(vec![
        TensorLayer::init(&[3, 4, 2], &[2, 3, 2], Activation::Tanh, &mut rng)?.into(),
        TensorLayer::init(&[2, 3, 2], &[1, 1, 1], Activation::Identity, &mut rng)?.into(),
    ])?;
    let x = DenseTensor::from_fn(Shape::new(vec![3, 4, 2, 5])?, |_| rng.random_range(-1.0..1.0));
    let t = DenseTensor::from_fn(Shape::new(vec![1, 1, 1, 5])?, |_| rng.random_range(0.0..1.0));
    let report = grad_check(&net, &x, Some(&t), LossFunction::BceLogits, 1e-5, 1e-4)?;
    println!("{report}");
    Ok(())
}
