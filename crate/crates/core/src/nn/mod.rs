//! A closed set of layers (conv, ReLU, 2×2 max-pool, flatten, dense) with
//! forward, softmax cross-entropy and exact backward passes.

mod gradcheck;
mod loss;
mod network;
mod params;
mod spec;
mod tensor;

pub use gradcheck::{grad_check, grad_check_report, GradCheckReport};
pub use loss::{argmax, loss_softmax_xent, predict_topk, softmax};
pub use network::{backward, forward, forward_trace, infer, Cache, LayerCache};
pub use params::{init_params, Gradients, LayerParams, Parameters};
pub use spec::{conv_out, ActShape, LayerSpec, NetworkSpec};
pub use tensor::Tensor;
