//! Scalar abstraction for the numeric engine.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Floating-point scalar used by the tensor kernels, the model and the
/// decoding loops.
///
/// Every kernel iterates and accumulates in a fixed order, so for a given
/// scalar type results are bit-identical from run to run. `f32` is the
/// reference type: weight files store `f32` and the golden tests pin `f32`
/// bit patterns. `f64` is available for wider-precision experiments.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion from the storage type used on disk.
    fn from_f32_exact(value: f32) -> Self;
}

impl Scalar for f32 {
    fn from_f32_exact(value: f32) -> Self {
        value
    }
}

impl Scalar for f64 {
    fn from_f32_exact(value: f32) -> Self {
        value as f64
    }
}
