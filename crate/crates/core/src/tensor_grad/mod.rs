//! Dense `f64` tensors, the forward/backward operations the segmentation
//! network needs, momentum SGD and a finite-difference checker.

mod conv;
mod gradcheck;
mod ops;
mod params;
mod tensor;

pub use conv::{conv2d_backward, conv2d_forward};
pub use gradcheck::{finite_diff_check, max_relative_error, numeric_grad, relative_error};
pub use ops::{
    avgpool2_backward, avgpool2_forward, bilinear_resize, channel_softmax, relu_backward,
    relu_forward, resize_plane,
};
pub use params::{
    sgd_step, sgd_step_scaled, Param, ParamSet, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use tensor::Tensor;
