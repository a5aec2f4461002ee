//! Scalar abstraction for the numeric parts of the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumCast};

/// Floating point scalar: `f32` or `f64`.
pub trait Real: Float + FromPrimitive + NumCast + Debug + Display + Send + Sync + 'static {
    /// Converts an `f64` constant into `Self`.
    ///
    /// Every literal used by the formulas is representable (possibly rounded)
    /// in both `f32` and `f64`, so this never fails for those types.
    fn lit(value: f64) -> Self {
        <Self as NumCast>::from(value).expect("f64 literal representable in scalar type")
    }

    /// Converts `Self` back to `f64` for reporting.
    fn to_f64_lossy(self) -> f64 {
        <f64 as NumCast>::from(self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
