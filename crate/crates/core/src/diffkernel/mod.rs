//! Minimal dense-tensor compute kernel with reverse-mode differentiation,
//! the gradient-reversal node, and SGD with cosine learning-rate decay.

pub mod gradcheck;
pub mod graph;
pub mod optim;
pub mod tensor;

pub use graph::{Graph, Var};
pub use optim::{ParamId, ParamStore, Sgd};
pub use tensor::Tensor;
