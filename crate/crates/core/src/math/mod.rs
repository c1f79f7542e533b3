//! Dense tensors, parameter sets, desk-scale models and clipped SGD.

mod model;
mod optim;
mod tensor;

pub use model::{init_params, loss_and_grad, predict, softmax, ModelKind, ModelSpec, Sample};
pub use optim::{clip_gradient_l1, l1_norm, sgd_step};
pub use tensor::{DenseTensor, ParamSet};
