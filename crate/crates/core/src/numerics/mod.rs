//! Dense tensors and the differentiable layer set used by the receiver.
//!
//! Every layer has an explicit backward pass. Kernels are generic over
//! [`Scalar`] so the same code trains in `f32` and is verified against
//! finite differences in `f64`.

mod activation;
mod adam;
mod conv;
pub mod gradcheck;
mod norm;
mod tensor;

pub use activation::{relu, relu_backward, relu_in_place};
pub use adam::{adam_step, AdamHyper, AdamState};
pub use conv::{conv2d, conv2d_backward, ConvGrads, ConvLayer};
pub use gradcheck::{finite_diff_check, GradCheckConfig, GradCheckReport, GradProbe, ParamGroup};
pub use norm::{layer_norm, layer_norm_backward, layer_norm_forward, LayerNorm, NormCache};
pub use tensor::Tensor;

use core::fmt::{Debug, Display};
use core::iter::Sum;
use core::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

/// Real scalar used by tensors: `f32` for training, `f64` for verification.
pub trait Scalar:
    num_traits::Float
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}
