//! Scalar abstraction shared by the numeric layers.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar used throughout the analyzer: `f32` or `f64`.
///
/// Contract tolerances are stated for `f64`; [`Real::tol`] rescales them so
/// that the same checks remain meaningful at lower precision.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless-enough conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// `tol` if the type resolves it, otherwise a precision-scaled fallback.
    fn tol(tol: f64) -> Self {
        let floor = Self::epsilon() * Self::lit(1024.0);
        Self::lit(tol).max(floor)
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
