//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All geometry is written against [`Real`], so the same code runs at `f32`
//! or `f64`. The default tolerances throughout the crate are tuned for `f64`;
//! `f32` instantiations are useful for quick exploration only.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point field used by the models, solvers and probes.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Every `Real` can represent (a rounding of)
    /// any finite `f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 literal")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize fits in float")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for [`Real::lit`].
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::lit(x)
}

/// `max(1, |x|)`, the usual scale for mixed absolute/relative tolerances.
#[inline]
pub fn unit_scale<T: Real>(x: T) -> T {
    x.abs().max(T::one())
}
