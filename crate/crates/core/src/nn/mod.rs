//! Minimal neural-network numerics with explicit forward/backward passes.
//!
//! Every layer forward returns its output together with a context value
//! holding what the backward pass needs. Backward consumes the context by
//! value, so a context can only ever be used once.

mod activation;
mod adam;
mod batchnorm;
mod conv;
mod dense;
mod dropout;
pub mod gradcheck;
mod loss;
mod tensor;

pub use activation::{relu, relu_grad, ReluCtx};
pub use adam::{adam_step, AdamConfig};
pub use batchnorm::{
    batchnorm1d, batchnorm1d_grad, batchnorm1d_infer, BatchNormCtx, BatchNormGrads, RunningStats,
    BN_EPS, BN_MOMENTUM,
};
pub use conv::{conv1d, conv1d_grad, conv_out_len, Conv1dCtx, Conv1dGrads};
pub use dense::{dense, dense_grad, DenseCtx, DenseGrads};
pub use dropout::{dropout, dropout_grad, DropoutCtx};
pub use gradcheck::{check_gradient, GradCheckConfig};
pub use loss::{softmax_rows, softmax_xent, SoftmaxXent};
pub use tensor::{Param, Scalar, Tensor};

/// Whether a layer runs with training behavior (batch statistics, dropout)
/// or inference behavior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}
