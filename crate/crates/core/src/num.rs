//! Scalar abstraction: the numerical core is generic over the floating-point
//! type. `f64` is the default throughout the CLI; `f32` works with loosened
//! tolerances.

use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar for all quadrature/estimation math.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + num_traits::FloatConst
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Shorthand conversion from an `f64` literal.
    #[inline]
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("literal not representable in scalar type")
    }

    /// Lossy conversion to `f64` (for reporting and serialization).
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar not convertible to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
