//! Floating-point scalar abstraction shared by the numerical modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the estimators are generic over (`f32` or `f64`).
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + core::ops::AddAssign
    + core::ops::SubAssign
    + core::ops::MulAssign
    + core::ops::DivAssign
    + 'static
{
    /// Lossless-enough conversion from an `f64` constant.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable in scalar")
    }

    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("usize representable in scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
