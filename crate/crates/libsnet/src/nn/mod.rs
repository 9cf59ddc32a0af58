//! Minimal differentiable layer set: 1D convolution, batch normalization,
//! ReLU, dense, global average pooling.
//!
//! Every layer provides an exact reverse-mode gradient that is verified
//! against central finite differences (see [`gradcheck`]). The whole stack is
//! generic over [`Scalar`]: `f64` is the reference precision used for
//! gradient checking, `f32` is available for throughput.
//!
//! Contract split: the layer kernels in this module `assert!` on shape
//! mismatches (programmer error); data-dependent failures surface as
//! [`crate::Error`] from the network-level code in [`crate::models`] and
//! [`crate::train`]. No operation mutates its input tensor.

pub mod batchnorm;
pub mod conv;
pub mod dense;
pub mod gradcheck;
pub mod ops;
pub mod tensor;
pub mod winograd;

pub use batchnorm::{BatchNorm1d, BnCache};
pub use conv::Conv1d;
pub use dense::Dense;
pub use gradcheck::{grad_check, GradCheckReport};
pub use ops::{global_avg_pool, global_avg_pool_backward, relu, relu2, relu2_backward, relu_backward};
pub use tensor::{Tensor2, Tensor3};

/// Whether batch statistics (train) or running statistics (eval) drive
/// batch normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Floating-point element type of the engine.
pub trait Scalar:
    num_traits::Float
    + std::fmt::Debug
    + std::fmt::Display
    + std::iter::Sum
    + Default
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
    fn from_usize(v: usize) -> Self {
        Self::from_f64(v as f64)
    }
    /// Short name used in model files and logs.
    const NAME: &'static str;
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
    const NAME: &'static str = "f32";
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
    const NAME: &'static str = "f64";
}
