use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the numerical core is written against.
///
/// Implemented for `f32` and `f64`. Tolerances inside the library are
/// expressed through [`Scalar::lit`] and [`Scalar::tol`] so that single
/// precision gets thresholds it can actually reach.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// `max(x, eps_mult · ε)`: a threshold that never drops below the
    /// resolution of the type.
    #[inline]
    fn tol(x: f64, eps_mult: f64) -> Self {
        Self::lit(x).max(Self::epsilon() * Self::lit(eps_mult))
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
