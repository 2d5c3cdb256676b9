//! Floating-point scalar abstraction shared by the evaluation and optimization code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Real scalar used for money, probabilities and spend: `f32` or `f64`.
pub trait Scalar: Float + FloatConst + FromPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static {
    /// Converts an `f64` literal into this scalar (rounding for `f32`).
    fn of(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite literal")
    }

    /// Widens to `f64` for reporting.
    fn to_f64_lossless(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
