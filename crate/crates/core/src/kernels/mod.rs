//! Forward and backward numeric kernels, independent of the tape.

pub mod conv;
pub mod norm;
pub mod pool;

pub use conv::{ConvGeometry, Padding};
pub use norm::{MovingStats, NormConfig, NormMode};
