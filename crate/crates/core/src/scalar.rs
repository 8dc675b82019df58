//! Scalar abstraction: the numerical core is generic over the floating type.

use num_traits::{Float, FromPrimitive, Signed};
use std::fmt::{Debug, Display};

/// Floating scalar the kernels, grids and solvers are generic over.
///
/// `f32` is enough for smoke experiments; the type aliases at the crate root
/// fix [`crate::Scalar`] = `f64`, which all documented tolerances assume.
pub trait Real: Float + FromPrimitive + Signed + Debug + Display + Send + Sync + 'static {}

impl<T> Real for T where T: Float + FromPrimitive + Signed + Debug + Display + Send + Sync + 'static {}

/// Convert an `f64` literal into the working scalar.
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 value must convert into the scalar type")
}

/// Convert back to `f64` for reports and serialization.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().expect("scalar must convert to f64")
}
