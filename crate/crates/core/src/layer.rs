//! The tensor layer: one weight matrix per mode, a bias tensor and an
//! activation,
//!
//! ```text
//! H = X ×_0 U_0 ×_1 U_1 … ×_{N-1} U_{N-1} + B,    O = g(H)
//! ```
//!
//! where `X` carries a trailing batch mode that no weight touches and `B` is
//! broadcast across it.
//!
//! The gradients never materialize the Kronecker chains of the matricized
//! form. For a downstream error `Δ = ∂f/∂O ∗ g'(H)`:
//!
//! * `∂f/∂U_i = Δ_(i) · Z_(i)ᵀ` with `Z = X ×_{j≠i} U_j`, which equals
//!   `Δ_(i) (⊗_{j≠i} U_j) X_(i)ᵀ` and sums over the batch mode,
//! * `∂f/∂B` is `Δ` summed over the batch mode,
//! * `∂f/∂X = Δ ×_0 U_0ᵀ … ×_{N-1} U_{N-1}ᵀ`, the folded action of
//!   `(U_{N-1} ⊗ … ⊗ U_0)ᵀ`.

use rand::Rng;

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::tensor::{mode_product, unfolded_gram, DenseTensor, Matrix, Shape};

#[derive(Clone, Debug, PartialEq)]
pub struct TensorLayer {
    weights: Vec<Matrix>,
    bias: DenseTensor,
    activation: Activation,
}

/// Values retained by [`TensorLayer::forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct LayerCache {
    pub input: DenseTensor,
    pub pre_activation: DenseTensor,
    pub output: DenseTensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradients {
    pub d_weights: Vec<Matrix>,
    pub d_bias: DenseTensor,
    pub d_input: DenseTensor,
}

impl TensorLayer {
    pub fn new(weights: Vec<Matrix>, bias: DenseTensor, activation: Activation) -> Result<Self> {
        if weights.len() != bias.order() {
            return Err(Error::shape(format!(
                "{} weight matrices for a bias of order {}",
                weights.len(),
                bias.order()
            )));
        }
        for (i, (w, &j)) in weights.iter().zip(bias.dims()).enumerate() {
            if w.rows() != j {
                return Err(Error::shape(format!(
                    "weight {i} has {} rows but the bias extent is {j}",
                    w.rows()
                )));
            }
        }
        Ok(TensorLayer {
            weights,
            bias,
            activation,
        })
    }

    /// Glorot-style uniform weights per mode, `U_i ~ U[-s, s]` with
    /// `s = √(6 / (I_i + J_i))`, and a zero bias.
    pub fn init<R: Rng + ?Sized>(
        input: &[usize],
        output: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if input.len() != output.len() {
            return Err(Error::shape(format!(
                "input extents {input:?} and output extents {output:?} differ in order"
            )));
        }
        Shape::new(input.to_vec())?;
        let bias = DenseTensor::zeros(Shape::new(output.to_vec())?);
        let weights = input
            .iter()
            .zip(output)
            .map(|(&i, &j)| {
                let s = (6.0 / (i + j) as f64).sqrt();
                let data = (0..i * j).map(|_| rng.random_range(-s..=s)).collect();
                Matrix::new(j, i, data)
            })
            .collect::<Result<Vec<_>>>()?;
        TensorLayer::new(weights, bias, activation)
    }

    pub fn order(&self) -> usize {
        self.weights.len()
    }

    pub fn input_extents(&self) -> Vec<usize> {
        self.weights.iter().map(Matrix::cols).collect()
    }

    pub fn output_extents(&self) -> &[usize] {
        self.bias.dims()
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn bias(&self) -> &DenseTensor {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.rows() * w.cols()).sum::<usize>() + self.bias.len()
    }

    /// Parameter buffers in a fixed order: `U_0, …, U_{N-1}, B`.
    pub fn param_blocks(&self) -> Vec<&[f64]> {
        let mut blocks: Vec<&[f64]> = self.weights.iter().map(Matrix::data).collect();
        blocks.push(self.bias.data());
        blocks
    }

    pub fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut blocks: Vec<&mut [f64]> = self.weights.iter_mut().map(Matrix::data_mut).collect();
        blocks.push(self.bias.data_mut());
        blocks
    }

    fn check_input(&self, x: &DenseTensor) -> Result<usize> {
        let n = self.order();
        let input = self.input_extents();
        if x.order() != n + 1 || x.dims()[..n] != input[..] {
            return Err(Error::shape(format!(
                "tensor layer expects {input:?} plus a batch mode, got {:?}",
                x.shape()
            )));
        }
        Ok(x.dims()[n])
    }

    /// Multilinear transform plus broadcast bias, before the activation.
    pub fn pre_activation(&self, x: &DenseTensor) -> Result<DenseTensor> {
        self.check_input(x)?;
        let mut h = x.clone();
        for (mode, w) in self.weights.iter().enumerate() {
            h = mode_product(&h, w, mode)?;
        }
        let bias = self.bias.data();
        for chunk in h.data_mut().chunks_exact_mut(bias.len()) {
            for (v, b) in chunk.iter_mut().zip(bias) {
                *v += b;
            }
        }
        Ok(h)
    }

    pub fn forward(&self, x: &DenseTensor) -> Result<LayerCache> {
        let pre_activation = self.pre_activation(x)?;
        let act = self.activation;
        let output = pre_activation.map(|v| act.apply(v));
        Ok(LayerCache {
            input: x.clone(),
            pre_activation,
            output,
        })
    }

    /// Forward pass without keeping a cache.
    pub fn infer(&self, x: &DenseTensor) -> Result<DenseTensor> {
        let act = self.activation;
        Ok(self.pre_activation(x)?.map(|v| act.apply(v)))
    }

    fn delta(&self, cache: &LayerCache, upstream: &DenseTensor) -> Result<DenseTensor> {
        let batch = self
            .check_input(&cache.input)
            .map_err(|e| Error::State(format!("cache input does not fit this layer: {e}")))?;
        let expected = self.bias.shape().appended(batch)?;
        if cache.pre_activation.shape() != &expected || cache.output.shape() != &expected {
            return Err(Error::State(format!(
                "cache holds pre-activations of shape {:?}, layer produces {:?}",
                cache.pre_activation.shape(),
                expected
            )));
        }
        if upstream.shape() != &expected {
            return Err(Error::shape(format!(
                "upstream gradient {:?} does not match layer output {:?}",
                upstream.shape(),
                expected
            )));
        }

        let act = self.activation;
        upstream.zip_map(&cache.pre_activation, |up, h| up * act.derivative(h))
    }

    pub fn backward(&self, cache: &LayerCache, upstream: &DenseTensor) -> Result<LayerGradients> {
        let n = self.order();
        let delta = self.delta(cache, upstream)?;
        let mut d_weights = Vec::with_capacity(n);
        for i in 0..n {
            let mut z = cache.input.clone();
            for (j, w) in self.weights.iter().enumerate() {
                if j != i {
                    z = mode_product(&z, w, j)?;
                }
            }
            d_weights.push(unfolded_gram(&delta, &z, i)?);
        }

        let d_bias = delta.sum_last_mode().reshape(self.bias.dims().to_vec())?;

        Ok(LayerGradients {
            d_weights,
            d_bias,
            d_input: self.propagate(delta)?,
        })
    }

    /// Only the gradient with respect to the input; skips the parameter gradients.
    pub fn input_gradient(&self, cache: &LayerCache, upstream: &DenseTensor) -> Result<DenseTensor> {
        self.propagate(self.delta(cache, upstream)?)
    }

    fn propagate(&self, delta: DenseTensor) -> Result<DenseTensor> {
        let mut d_input = delta;
        for (mode, w) in self.weights.iter().enumerate() {
            d_input = mode_product(&d_input, &w.transpose(), mode)?;
        }
        Ok(d_input)
    }
}

impl LayerGradients {
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut blocks: Vec<&[f64]> = self.d_weights.iter().map(Matrix::data).collect();
        blocks.push(self.d_bias.data());
        blocks
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut blocks: Vec<&mut [f64]> = self.d_weights.iter_mut().map(Matrix::data_mut).collect();
        blocks.push(self.d_bias.data_mut());
        blocks
    }
}

/// Parameters of a fully connected `I → J → K` network: `J(I + K) + J + K`.
pub fn param_count_dense(input: usize, hidden: usize, output: usize) -> usize {
    hidden * (input + output) + hidden + output
}

/// Parameters of the matching two-layer FT-Net with extents
/// `(I_i) → (J_i) → (K_i)`: `Σ_i (I_i J_i + J_i K_i) + Π J_i + Π K_i`.
pub fn param_count_tensor(input: &[usize], hidden: &[usize], output: &[usize]) -> Result<usize> {
    if input.len() != hidden.len() || hidden.len() != output.len() {
        return Err(Error::shape(format!(
            "extent lists {input:?}, {hidden:?}, {output:?} differ in order"
        )));
    }
    if input.is_empty() {
        return Err(Error::shape("extent lists are empty"));
    }
    if input.iter().chain(hidden).chain(output).any(|&e| e == 0) {
        return Err(Error::shape("extents must be positive"));
    }
    let weights: usize = input
        .iter()
        .zip(hidden)
        .zip(output)
        .map(|((&i, &j), &k)| i * j + j * k)
        .sum();
    Ok(weights + hidden.iter().product::<usize>() + output.iter().product::<usize>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::sigmoid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(dims: &[usize], rng: &mut ChaCha8Rng) -> DenseTensor {
        let shape = Shape::new(dims.to_vec()).unwrap();
        let n = shape.numel();
        DenseTensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn random_layer(input: &[usize], output: &[usize], act: Activation, rng: &mut ChaCha8Rng) -> TensorLayer {
        let mut layer = TensorLayer::init(input, output, act, rng).unwrap();
        for b in layer.bias.data_mut() {
            *b = rng.random_range(-0.5..0.5);
        }
        layer
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let weights = vec![Matrix::identity(3), Matrix::identity(2)];
        let bias = DenseTensor::zeros(Shape::new(vec![3, 2]).unwrap());
        let layer = TensorLayer::new(weights, bias, Activation::Identity).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_tensor(&[3, 2, 4], &mut rng);
        assert_eq!(layer.forward(&x).unwrap().output, x);
    }

    #[test]
    fn scalar_sigmoid_neuron() {
        let (w, b, x) = (0.7, -0.3, 1.9);
        let layer = TensorLayer::new(
            vec![Matrix::new(1, 1, vec![w]).unwrap()],
            DenseTensor::from_vec(vec![1], vec![b]).unwrap(),
            Activation::Sigmoid,
        )
        .unwrap();
        let out = layer
            .forward(&DenseTensor::from_vec(vec![1, 1], vec![x]).unwrap())
            .unwrap()
            .output;
        assert!((out.data()[0] - 1.0 / (1.0 + (-(w * x + b)).exp())).abs() < 1e-15);
        assert!((out.data()[0] - sigmoid(w * x + b)).abs() < 1e-15);
    }

    #[test]
    fn forward_matches_summation_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let layer = random_layer(&[3, 4], &[2, 2], Activation::Tanh, &mut rng);
        let x = random_tensor(&[3, 4, 5], &mut rng);
        let out = layer.forward(&x).unwrap().output;
        let (u0, u1) = (&layer.weights[0], &layer.weights[1]);
        for c in 0..5 {
            for j0 in 0..2 {
                for j1 in 0..2 {
                    let mut acc = layer.bias.get(&[j0, j1]);
                    for i0 in 0..3 {
                        for i1 in 0..4 {
                            acc += x.get(&[i0, i1, c]) * u0.get(j0, i0) * u1.get(j1, i1);
                        }
                    }
                    assert!((out.get(&[j0, j1, c]) - acc.tanh()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn forward_rejects_bad_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layer = random_layer(&[3, 4], &[2, 2], Activation::Tanh, &mut rng);
        assert!(matches!(
            layer.forward(&random_tensor(&[3, 4], &mut rng)),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            layer.forward(&random_tensor(&[4, 3, 2], &mut rng)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let layer = random_layer(&[3, 2], &[2, 4], Activation::Sigmoid, &mut rng);
        let cache = layer.forward(&random_tensor(&[3, 2, 3], &mut rng)).unwrap();
        let grads = layer
            .backward(&cache, &DenseTensor::zeros(cache.output.shape().clone()))
            .unwrap();
        for block in grads.blocks() {
            assert!(block.iter().all(|&g| g == 0.0));
        }
        assert!(grads.d_input.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn scalar_chain_rule() {
        let (w, b, x) = (1.5, 0.25, -2.0);
        let layer = TensorLayer::new(
            vec![Matrix::new(1, 1, vec![w]).unwrap()],
            DenseTensor::from_vec(vec![1], vec![b]).unwrap(),
            Activation::Identity,
        )
        .unwrap();
        let cache = layer
            .forward(&DenseTensor::from_vec(vec![1, 1], vec![x]).unwrap())
            .unwrap();
        let g = layer
            .backward(&cache, &DenseTensor::from_vec(vec![1, 1], vec![1.0]).unwrap())
            .unwrap();
        assert_eq!(g.d_weights[0].data(), &[x]);
        assert_eq!(g.d_bias.data(), &[1.0]);
        assert_eq!(g.d_input.data(), &[w]);
    }

    #[test]
    fn backward_rejects_foreign_cache() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_layer(&[3, 2], &[2, 4], Activation::Sigmoid, &mut rng);
        let b = random_layer(&[2, 2], &[2, 4], Activation::Sigmoid, &mut rng);
        let cache = a.forward(&random_tensor(&[3, 2, 3], &mut rng)).unwrap();
        assert!(matches!(
            b.backward(&cache, &cache.output),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn init_is_deterministic_with_zero_bias() {
        let a = TensorLayer::init(&[5, 4], &[3, 6], Activation::Relu, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = TensorLayer::init(&[5, 4], &[3, 6], Activation::Relu, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!(a.bias().data().iter().all(|&v| v == 0.0));
        let s0 = (6.0f64 / 8.0).sqrt();
        assert!(a.weights()[0].data().iter().all(|v| v.abs() <= s0));
    }

    #[test]
    fn init_weights_are_centered() {
        // 10^5 entries from U[-s, s]; standard error of the mean is s/√3/√n.
        let layer = TensorLayer::init(&[250], &[400], Activation::Identity, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let w = layer.weights()[0].data();
        assert_eq!(w.len(), 100_000);
        let s = (6.0f64 / 650.0).sqrt();
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let se = s / 3f64.sqrt() / (w.len() as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn param_count_examples() {
        assert_eq!(param_count_tensor(&[28, 28], &[60, 60], &[1, 1]).unwrap(), 7081);
        assert_eq!(param_count_tensor(&[1, 1], &[1, 1], &[1, 1]).unwrap(), 6);
        assert_eq!(param_count_dense(784, 3600, 1), 2_829_601);
        assert_eq!(param_count_dense(1, 1, 1), 4);
        assert!(matches!(
            param_count_tensor(&[2, 2], &[2], &[2, 2]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn param_count_collapses_at_order_one() {
        for i in 1..=100 {
            for j in 1..=100 {
                for k in 1..=100 {
                    assert_eq!(
                        param_count_tensor(&[i], &[j], &[k]).unwrap(),
                        param_count_dense(i, j, k)
                    );
                }
            }
        }
    }

    #[test]
    fn tensorized_count_never_exceeds_dense() {
        // Balanced factorizations of each total into N ≥ 2 equal factors ≥ 2.
        for n in 2..=4u32 {
            for a in 2..=6usize {
                for b in 2..=6usize {
                    for c in 2..=6usize {
                        let (i, j, k) = (vec![a; n as usize], vec![b; n as usize], vec![c; n as usize]);
                        let tensor = param_count_tensor(&i, &j, &k).unwrap();
                        let dense = param_count_dense(a.pow(n), b.pow(n), c.pow(n));
                        assert!(tensor <= dense, "{i:?} {j:?} {k:?}: {tensor} > {dense}");
                    }
                }
            }
        }
    }

    #[test]
    fn layer_param_count_matches_formula_halves() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let first = TensorLayer::init(&[28, 28], &[60, 60], Activation::Sigmoid, &mut rng).unwrap();
        let second = TensorLayer::init(&[60, 60], &[1, 1], Activation::Sigmoid, &mut rng).unwrap();
        assert_eq!(
            first.num_params() + second.num_params(),
            param_count_tensor(&[28, 28], &[60, 60], &[1, 1]).unwrap()
        );
    }
}
