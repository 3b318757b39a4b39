//! Dense layers, neighbourhood aggregators (mean, max-pool, multi-head
//! attention), softmax cross-entropy, hand-written backpropagation and
//! SGD with momentum. No autodiff: every gradient is derived by hand and
//! checked against finite differences in [`gradcheck`].

mod checkpoint;
pub mod gradcheck;
mod hop;
mod layers;
mod loss;
mod model;
mod optim;
mod params;
mod real;
mod single;

pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointHeader};
pub use gradcheck::{grad_check, grad_check_report, GradCheckArch, GradCheckReport};
pub use hop::Hop;
pub use loss::{softmax_cross_entropy, LossOutput};
pub use model::Tape;
pub use optim::{sgd_step, OptimizerState, SgdConfig};
pub use params::{
    average_models, Arch, GnnKind, LayerKind, LayerSpec, ModelParams, ModelSpec, ParamSet,
};
pub use real::Real;
pub use single::{combine_aggregate, forward_mlp, forward_single, loss_and_grad, ArchContext};
