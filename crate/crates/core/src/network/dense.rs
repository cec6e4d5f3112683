use rand::Rng;

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::layer::LayerCache;
use crate::tensor::{DenseTensor, Matrix};

/// Fully connected layer `y = g(W x + b)` acting on `(I, C)` batches.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    weight: Matrix,
    bias: Vec<f64>,
    activation: Activation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseGradients {
    pub d_weight: Matrix,
    pub d_bias: Vec<f64>,
    pub d_input: DenseTensor,
}

impl DenseLayer {
    pub fn new(weight: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::shape(format!(
                "bias of length {} for a {}×{} weight",
                bias.len(),
                weight.rows(),
                weight.cols()
            )));
        }
        Ok(DenseLayer {
            weight,
            bias,
            activation,
        })
    }

    /// Glorot uniform weight, zero bias.
    pub fn init<R: Rng + ?Sized>(
        input: usize,
        output: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if input == 0 || output == 0 {
            return Err(Error::shape("dense layer sizes must be positive"));
        }
        let s = (6.0 / (input + output) as f64).sqrt();
        let data = (0..input * output).map(|_| rng.random_range(-s..=s)).collect();
        DenseLayer::new(Matrix::new(output, input, data)?, vec![0.0; output], activation)
    }

    pub fn input_size(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_size(&self) -> usize {
        self.weight.rows()
    }

    pub fn weight(&self) -> &Matrix {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn num_params(&self) -> usize {
        self.weight.rows() * self.weight.cols() + self.bias.len()
    }

    pub fn param_blocks(&self) -> Vec<&[f64]> {
        vec![self.weight.data(), &self.bias]
    }

    pub fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.weight.data_mut(), &mut self.bias]
    }

    fn batch_matrix(&self, x: &DenseTensor) -> Result<Matrix> {
        if x.order() != 2 || x.dims()[0] != self.input_size() {
            return Err(Error::shape(format!(
                "dense layer expects ({}, batch), got {:?}",
                self.input_size(),
                x.shape()
            )));
        }
        Matrix::new(x.dims()[0], x.dims()[1], x.data().to_vec())
    }

    pub fn pre_activation(&self, x: &DenseTensor) -> Result<DenseTensor> {
        let xm = self.batch_matrix(x)?;
        let mut h = self.weight.matmul(&xm)?;
        for col in h.data_mut().chunks_exact_mut(self.bias.len()) {
            for (v, b) in col.iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        DenseTensor::from_vec(vec![self.output_size(), xm.cols()], h.data().to_vec())
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

    pub fn infer(&self, x: &DenseTensor) -> Result<DenseTensor> {
        let act = self.activation;
        Ok(self.pre_activation(x)?.map(|v| act.apply(v)))
    }

    fn delta(&self, cache: &LayerCache, upstream: &DenseTensor) -> Result<(Matrix, Matrix)> {
        let xm = self
            .batch_matrix(&cache.input)
            .map_err(|e| Error::State(format!("cache input does not fit this layer: {e}")))?;
        let expected = [self.output_size(), xm.cols()];
        if cache.pre_activation.dims() != expected {
            return Err(Error::State(format!(
                "cache holds pre-activations of shape {:?}, layer produces {expected:?}",
                cache.pre_activation.shape()
            )));
        }
        if upstream.dims() != expected {
            return Err(Error::shape(format!(
                "upstream gradient {:?} does not match layer output {expected:?}",
                upstream.shape()
            )));
        }
        let act = self.activation;
        let delta = upstream.zip_map(&cache.pre_activation, |up, h| up * act.derivative(h))?;
        Ok((xm, Matrix::new(expected[0], expected[1], delta.into_data())?))
    }

    pub fn backward(&self, cache: &LayerCache, upstream: &DenseTensor) -> Result<DenseGradients> {
        let (xm, dm) = self.delta(cache, upstream)?;
        let d_weight = dm.matmul(&xm.transpose())?;
        let d_bias = (0..dm.rows()).map(|r| (0..dm.cols()).map(|c| dm.get(r, c)).sum()).collect();
        Ok(DenseGradients {
            d_weight,
            d_bias,
            d_input: self.propagate(cache, &dm)?,
        })
    }

    /// Only the gradient with respect to the input; skips the parameter gradients.
    pub fn input_gradient(&self, cache: &LayerCache, upstream: &DenseTensor) -> Result<DenseTensor> {
        let (_, dm) = self.delta(cache, upstream)?;
        self.propagate(cache, &dm)
    }

    fn propagate(&self, cache: &LayerCache, dm: &Matrix) -> Result<DenseTensor> {
        let d_in = self.weight.transpose().matmul(dm)?;
        DenseTensor::from_vec(cache.input.dims().to_vec(), d_in.data().to_vec())
    }
}

impl DenseGradients {
    pub fn blocks(&self) -> Vec<&[f64]> {
        vec![self.d_weight.data(), &self.d_bias]
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.d_weight.data_mut(), &mut self.d_bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_map_by_hand() {
        let w = Matrix::from_rows(&[&[1.0, 2.0], &[0.0, -1.0], &[3.0, 0.5]]).unwrap();
        let layer = DenseLayer::new(w, vec![0.5, 0.0, -1.0], Activation::Identity).unwrap();
        let x = DenseTensor::from_vec(vec![2, 1], vec![2.0, 4.0]).unwrap();
        assert_eq!(layer.infer(&x).unwrap().data(), &[10.5, -4.0, 7.0]);
        assert_eq!(layer.num_params(), 9);
    }

    #[test]
    fn bias_must_match_rows() {
        assert!(DenseLayer::new(Matrix::zeros(2, 3), vec![0.0; 3], Activation::Identity).is_err());
    }

    #[test]
    fn rejects_wrong_input_width() {
        let layer = DenseLayer::new(Matrix::zeros(2, 3), vec![0.0; 2], Activation::Identity).unwrap();
        let x = DenseTensor::from_vec(vec![2, 1], vec![1.0, 1.0]).unwrap();
        assert!(matches!(layer.forward(&x), Err(Error::Shape(_))));
    }
}
