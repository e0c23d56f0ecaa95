//! Small real-valued layer engine with exact analytic gradients.
//!
//! Only what the behavioral models need: valid 3x3 convolution with tanh,
//! average pooling, dense layers (tanh / softmax / linear), the dual
//! channel/spatial attention block and Adam. Gradients are hand-derived and
//! verified against central finite differences in the test suites.

mod adam;
mod attention;
mod layers;
mod network;
mod params;
mod tensor;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use attention::{bottleneck, channel_attention, spatial_attention, AttentionParams};
pub use layers::{avg_pool, conv2d_valid_forward, dense_forward, softmax, Activation, ConvLayer, DenseLayer, PoolAxis};
pub use network::{batch_loss, batch_loss_and_gradients, Network, Samples, GRAD_CHUNK};
pub use params::{count_parameters, NamedArray, ParamGrads, ParamSpec, Parameterized};
pub use tensor::Tensor3;
