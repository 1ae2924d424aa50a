//! Scalar abstraction shared by the analytic code paths.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps, ToPrimitive};

/// Floating-point scalar the analysis is generic over (`f32` or `f64`).
///
/// Special functions (the Gaussian tail and its logarithm) are evaluated in
/// `f64` and rounded into `Self`, so `f32` results carry `f32` precision
/// while `f64` results meet the stated tolerances.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into `Self`.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Real")
    }

    #[inline]
    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("usize is representable in every Real")
    }

    #[inline]
    fn of_u64(v: u64) -> Self {
        Self::from_u64(v).expect("u64 is representable in every Real")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
