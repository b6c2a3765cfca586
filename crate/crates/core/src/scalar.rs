//! Floating-point scalar abstraction: f32 or f64.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps, NumCast};

/// Scalar type all numeric code is generic over.
pub trait Scalar:
    Float + FromPrimitive + NumCast + NumAssignOps + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Shorthand for casting a literal; panics only on values outside the
    /// type's range, which never happens for the constants used here.
    #[inline]
    fn cst(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("constant representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        <f64 as NumCast>::from(self).expect("finite scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
