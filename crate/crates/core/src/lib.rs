//! Tensor layers, fully tensorial networks and tensorized GANs.
//!
//! A tensor layer maps an order-`N` input through one small factor matrix per
//! mode, `H = X ×₀ U₀ ×₁ U₁ … ×_{N-1} U_{N-1} + B`, instead of one dense
//! matrix on the flattened input. Mode indices are 0-based throughout.

pub mod activation;
pub mod cli;
pub mod data;
pub mod error;
pub mod gan;
pub mod layer;
pub mod network;
pub mod record;
pub mod tensor;

pub use activation::Activation;
pub use error::{Error, Result};
pub use layer::{param_count_dense, param_count_tensor, LayerCache, LayerGradients, TensorLayer};
pub use network::{DenseLayer, Gradients, Layer, LossFunction, Network, Optimizer, OptimizerConfig};
pub use tensor::{fold, kronecker, mode_product, multi_mode_product, unfold, DenseTensor, Matrix, Shape};
