//! Weakly supervised semantic segmentation trained from image-level labels
//! through three stages of increasing difficulty.
//!
//! An initial network learns from saliency maps of simple single-object
//! images. Its predictions, restricted to each image's known class, become
//! masks for an enhanced network, whose label-restricted predictions on
//! multi-object images in turn train the final network. Everything runs on a
//! small synthetic corpus with a hand-written CPU convolution stack.

pub mod cli;
pub mod data;
pub mod error;
pub mod losses;
pub mod pipeline;
pub mod pseudolabel;
pub mod saliency;
pub mod segnet;
pub mod tensor_grad;

pub use error::{Error, Result};
