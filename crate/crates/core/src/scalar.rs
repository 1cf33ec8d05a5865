use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar used throughout the numeric core: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Every `f64` maps to some value of an IEEE
    /// float type, so this never fails for `f32`/`f64`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_f32_exact(x: f32) -> Self;

    fn to_f32_lossy(self) -> f32;
}

impl Scalar for f32 {
    fn from_f32_exact(x: f32) -> Self {
        x
    }

    fn to_f32_lossy(self) -> f32 {
        self
    }
}

impl Scalar for f64 {
    fn from_f32_exact(x: f32) -> Self {
        f64::from(x)
    }

    fn to_f32_lossy(self) -> f32 {
        self as f32
    }
}
