//! Scalar abstraction shared by the deterministic numerics.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal; panics only for values the type cannot hold at all.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Relative tolerance floor that is still meaningful for this type.
    #[inline]
    fn tol_floor() -> Self {
        Self::epsilon() * Self::lit(64.0)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
