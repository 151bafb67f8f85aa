//! Minimal tensor, layer, reverse-mode gradient, and optimizer machinery
//! for the generator/critic and encoder/decoder networks in this crate.

pub mod gradcheck;
pub mod layer;
pub mod network;
pub mod optimizer;
pub mod tensor;

pub use gradcheck::gradient_check;
pub use layer::LayerSpec;
pub use network::{Gradients, NetworkSpec, Trace};
pub use optimizer::{Optimizer, OptimizerKind};
pub use tensor::Tensor;
