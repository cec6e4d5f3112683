//! Sequential composition of tensor and dense layers.
//!
//! Every activation carries a trailing batch mode. At a boundary between
//! layers the buffer is only reinterpreted: a tensor layer's output
//! `(J_0, …, J_{N-1}, C)` feeds a dense layer as `(Π J_i, C)` in the same
//! first-index-fastest order, and a dense output feeds a tensor layer by the
//! inverse reshape.

mod dense;
mod gradcheck;
mod loss;
mod optim;

pub use dense::{DenseGradients, DenseLayer};
pub use gradcheck::{check_against, grad_check, relative_error, BlockReport, GradCheckReport};
pub use loss::LossFunction;
pub use optim::{Optimizer, OptimizerConfig};

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::layer::{LayerCache, LayerGradients, TensorLayer};
use crate::tensor::DenseTensor;

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Tensor(TensorLayer),
    Dense(DenseLayer),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Gradients {
    Tensor(LayerGradients),
    Dense(DenseGradients),
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Tensor(_) => "tensor",
            Layer::Dense(_) => "dense",
        }
    }

    pub fn input_extents(&self) -> Vec<usize> {
        match self {
            Layer::Tensor(l) => l.input_extents(),
            Layer::Dense(l) => vec![l.input_size()],
        }
    }

    pub fn output_extents(&self) -> Vec<usize> {
        match self {
            Layer::Tensor(l) => l.output_extents().to_vec(),
            Layer::Dense(l) => vec![l.output_size()],
        }
    }

    pub fn activation(&self) -> Activation {
        match self {
            Layer::Tensor(l) => l.activation(),
            Layer::Dense(l) => l.activation(),
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            Layer::Tensor(l) => l.num_params(),
            Layer::Dense(l) => l.num_params(),
        }
    }

    pub fn forward(&self, x: &DenseTensor) -> Result<LayerCache> {
        match self {
            Layer::Tensor(l) => l.forward(x),
            Layer::Dense(l) => l.forward(x),
        }
    }

    pub fn infer(&self, x: &DenseTensor) -> Result<DenseTensor> {
        match self {
            Layer::Tensor(l) => l.infer(x),
            Layer::Dense(l) => l.infer(x),
        }
    }

    pub fn backward(&self, cache: &LayerCache, upstream: &DenseTensor) -> Result<Gradients> {
        match self {
            Layer::Tensor(l) => l.backward(cache, upstream).map(Gradients::Tensor),
            Layer::Dense(l) => l.backward(cache, upstream).map(Gradients::Dense),
        }
    }

    pub fn input_gradient(&self, cache: &LayerCache, upstream: &DenseTensor) -> Result<DenseTensor> {
        match self {
            Layer::Tensor(l) => l.input_gradient(cache, upstream),
            Layer::Dense(l) => l.input_gradient(cache, upstream),
        }
    }

    pub fn param_blocks(&self) -> Vec<&[f64]> {
        match self {
            Layer::Tensor(l) => l.param_blocks(),
            Layer::Dense(l) => l.param_blocks(),
        }
    }

    pub fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Layer::Tensor(l) => l.param_blocks_mut(),
            Layer::Dense(l) => l.param_blocks_mut(),
        }
    }

    /// Names of the parameter blocks, aligned with [`Layer::param_blocks`].
    pub fn block_names(&self) -> Vec<String> {
        match self {
            Layer::Tensor(l) => (0..l.order())
                .map(|i| format!("U{i}"))
                .chain(std::iter::once("bias".to_string()))
                .collect(),
            Layer::Dense(_) => vec!["W".to_string(), "bias".to_string()],
        }
    }
}

impl From<TensorLayer> for Layer {
    fn from(l: TensorLayer) -> Self {
        Layer::Tensor(l)
    }
}

impl From<DenseLayer> for Layer {
    fn from(l: DenseLayer) -> Self {
        Layer::Dense(l)
    }
}

impl Gradients {
    pub fn blocks(&self) -> Vec<&[f64]> {
        match self {
            Gradients::Tensor(g) => g.blocks(),
            Gradients::Dense(g) => g.blocks(),
        }
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Gradients::Tensor(g) => g.blocks_mut(),
            Gradients::Dense(g) => g.blocks_mut(),
        }
    }

    pub fn d_input(&self) -> &DenseTensor {
        match self {
            Gradients::Tensor(g) => &g.d_input,
            Gradients::Dense(g) => &g.d_input,
        }
    }
}

/// An FT-Net, an MLP, or a mix of both.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

fn numel(dims: &[usize]) -> usize {
    dims.iter().product()
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::shape("a network needs at least one layer"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            let out = pair[0].output_extents();
            let next = pair[1].input_extents();
            let fits = match (&pair[0], &pair[1]) {
                (Layer::Tensor(_), Layer::Tensor(_)) => out == next,
                _ => numel(&out) == numel(&next),
            };
            if !fits {
                return Err(Error::shape(format!(
                    "layer {i} produces {out:?} but layer {} expects {next:?}",
                    i + 1
                )));
            }
        }
        Ok(Network { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_extents(&self) -> Vec<usize> {
        self.layers[0].input_extents()
    }

    pub fn output_extents(&self) -> Vec<usize> {
        self.layers[self.layers.len() - 1].output_extents()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Layer::num_params).sum()
    }

    /// All parameter buffers, layer by layer.
    pub fn param_blocks(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(Layer::param_blocks).collect()
    }

    pub fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(Layer::param_blocks_mut).collect()
    }

    /// Reinterprets `x` as `extents` followed by its trailing batch mode.
    fn conform(&self, index: usize, x: DenseTensor, extents: &[usize]) -> Result<DenseTensor> {
        let batch = *x.dims().last().unwrap_or(&0);
        let leading = numel(&x.dims()[..x.order() - 1]);
        if x.order() < 2 || leading != numel(extents) {
            return Err(Error::shape(format!(
                "layer {index} expects {extents:?} plus a batch mode, got {:?}",
                x.shape()
            )));
        }
        let mut dims = extents.to_vec();
        dims.push(batch);
        x.reshape(dims)
    }

    pub fn forward(&self, x: &DenseTensor) -> Result<(DenseTensor, Vec<LayerCache>)> {
        let mut caches: Vec<LayerCache> = Vec::with_capacity(self.layers.len());
        let mut current = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let input = self.conform(i, current, &layer.input_extents())?;
            let cache = layer.forward(&input)?;
            current = cache.output.clone();
            caches.push(cache);
        }
        Ok((current, caches))
    }

    /// Forward pass without caches.
    pub fn infer(&self, x: &DenseTensor) -> Result<DenseTensor> {
        let mut current = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let input = self.conform(i, current, &layer.input_extents())?;
            current = layer.infer(&input)?;
        }
        Ok(current)
    }

    /// Reverse-mode pass through every layer. The returned list is in layer
    /// order; the first entry's `d_input` is the gradient with respect to
    /// the network input, in the first layer's input shape.
    pub fn backward(&self, caches: &[LayerCache], d_output: &DenseTensor) -> Result<Vec<Gradients>> {
        let mut grads: Vec<Gradients> = Vec::with_capacity(self.layers.len());
        self.reverse_pass(caches, d_output, |layer, cache, up| {
            let g = layer.backward(cache, up)?;
            let d_input = g.d_input().clone();
            grads.push(g);
            Ok(d_input)
        })?;
        grads.reverse();
        Ok(grads)
    }

    /// Gradient with respect to the network input only, without any
    /// parameter gradients.
    pub fn input_gradient(&self, caches: &[LayerCache], d_output: &DenseTensor) -> Result<DenseTensor> {
        self.reverse_pass(caches, d_output, |layer, cache, up| layer.input_gradient(cache, up))
    }

    fn reverse_pass(
        &self,
        caches: &[LayerCache],
        d_output: &DenseTensor,
        mut step: impl FnMut(&Layer, &LayerCache, &DenseTensor) -> Result<DenseTensor>,
    ) -> Result<DenseTensor> {
        if caches.len() != self.layers.len() {
            return Err(Error::State(format!(
                "{} caches for a network of {} layers",
                caches.len(),
                self.layers.len()
            )));
        }
        let mut upstream = d_output.clone();
        for (i, (layer, cache)) in self.layers.iter().zip(caches).enumerate().rev() {
            let up = self
                .conform(i, upstream, &layer.output_extents())
                .map_err(|e| Error::State(format!("upstream gradient at layer {i}: {e}")))?;
            upstream = step(layer, cache, &up).map_err(|e| match e {
                Error::State(msg) => Error::State(format!("layer {i}: {msg}")),
                other => other,
            })?;
        }
        Ok(upstream)
    }

    /// `(layer index, block name)` for every block of [`Network::param_blocks`].
    pub fn block_layout(&self) -> Vec<(usize, String)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.block_names().into_iter().map(move |n| (i, n)))
            .collect()
    }
}

/// Flattens per-layer gradients into the block order of [`Network::param_blocks`].
pub fn gradient_blocks(grads: &[Gradients]) -> Vec<&[f64]> {
    grads.iter().flat_map(Gradients::blocks).collect()
}
