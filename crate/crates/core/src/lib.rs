//! Tensors, reverse-mode autodiff and the DC-UNet family of segmentation
//! networks, with the losses, metrics and data plumbing to train them.

pub mod arch;
pub mod autodiff;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod image;
pub mod kernels;
pub mod metrics;
pub mod model;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use image::{BitDepth, GrayImage, Interpolation};
pub use model::{Forward, Model, Param};
pub use tensor::{Scalar, Shape, Tensor};
