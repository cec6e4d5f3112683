//! One tensor layer next to the dense layer it replaces: outputs,
//! backpropagated gradients and parameter counts.

use ftnet::gan::rng_stream;
use ftnet::{param_count_dense, param_count_tensor, Activation, DenseTensor, Shape, TensorLayer};
use rand::Rng;

fn main() -> ftnet::Result<()> {
    let mut rng = rng_stream(7, 0);
    let layer = TensorLayer::init(&[28, 28], &[60, 60], Activation::LeakyRelu(0.2), &mut rng)?;
    println!(
        "tensor layer (28,28) → (60,60): {} parameters, a dense 784 → 3600 layer needs {}",
        layer.num_params(),
        784 * 3600 + 3600
    );

    // A batch of 16 images is a (28, 28, 16) tensor; the batch is the last mode.
    let x = DenseTensor::from_fn(Shape::new(vec![28, 28, 16])?, |_| rng.random_range(0.0..1.0));
    let cache = layer.forward(&x)?;
    println!("output extents {:?}", cache.output.dims());

    // Gradients of sum(H) with respect to every weight matrix, the bias and the input.
    let upstream = DenseTensor::filled(cache.output.shape().clone(), 1.0);
    let grads = layer.backward(&cache, &upstream)?;
    for (n, g) in grads.d_weights.iter().enumerate() {
        println!("dL/dU_{n}: {}×{}, norm {:.3}", g.rows(), g.cols(), g.frobenius_norm());
    }
    println!("dL/dB norm {:.3}, dL/dX extents {:?}", grads.d_bias.frobenius_norm(), grads.d_input.dims());

    println!(
        "two-layer budget: dense 784-3600-1 = {}, tensor (28,28)-(60,60)-(1,1) = {}",
        param_count_dense(784, 3600, 1),
        param_count_tensor(&[28, 28], &[60, 60], &[1, 1])?
    );
    Ok(())
}
