//! Hand-differentiated network kernels.
//!
//! There is no autodiff graph: every forward kernel has a matching backward
//! function whose gradients are checked against central finite differences
//! ([`grad_check`]). Tensors are `f64` for that reason; weights are narrowed to
//! `f32` only when persisted ([`persist`]).

mod adam;
mod conv;
mod encoder;
mod gradcheck;
mod linear;
mod loss;
pub mod persist;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use conv::{conv3x3_backward, conv3x3_forward, Conv3x3Params, ConvGrads};
pub use encoder::{
    encoder_backward, encoder_forward, encoder_forward_cached, EncoderCache, EncoderParams,
    ResBlock,
};
pub use gradcheck::{
    grad_check, grad_check_piecewise, relative_error, GradCheckReport, PatternHasher,
    REL_ERR_FLOOR,
};
pub use linear::{linear_backward, linear_forward, LinearGrads, LinearParams};
pub use loss::{l1_loss, relu, relu_backward, relu_in_place};
pub use tensor::Tensor;

pub(crate) use conv::{col2im, im2col};
pub(crate) use tensor::gemm;
