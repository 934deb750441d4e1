//! The dilated 1-D CNN classifier, written out layer by layer with explicit
//! forward and reverse passes.

pub mod activation;
pub mod batchnorm;
pub mod checkpoint;
pub mod config;
pub mod conv;
pub mod linear;
pub mod loss;
pub mod model;
pub mod params;
pub mod pool;

pub use activation::{dropout, dropout_backward, relu, relu_backward, DropoutKey};
pub use batchnorm::{batchnorm_backward, batchnorm_forward, BN_EPS, BN_MOMENTUM};
pub use checkpoint::{read_checkpoint, write_checkpoint, encode_checkpoint, decode_checkpoint};
pub use config::{receptive_field, ModelConfig, LAYERS, POOLED_STEPS};
pub use conv::{conv1d_backward, conv1d_forward, ConvShape};
pub use linear::{linear_backward, linear_forward};
pub use loss::{softmax, softmax_cross_entropy};
pub use model::{loss_and_grads, model_backward, model_forward, predict, ForwardCache, ModelInput, Step};
pub use params::{init_params, ModelGrads, ModelParams, Param, ParamKind, Slot};
pub use pool::{adaptive_avgpool, adaptive_avgpool4, adaptive_avgpool_backward};

/// Training uses batch statistics and dropout; evaluation uses running
/// statistics and no dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}
