//! Floating-point abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the solvers are generic over (`f32` or `f64`).
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal; every value used in the crate is representable.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Converts an index or count.
    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `|x|^p` with the convention `0^p = 0` for `p > 0`.
#[inline]
pub(crate) fn abs_pow<T: Scalar>(x: T, p: T) -> T {
    let a = x.abs();
    if a == T::zero() {
        T::zero()
    } else {
        a.powf(p)
    }
}

/// `|x|^(p-2) x`, the odd power map, continuous at zero for `p > 1`.
#[inline]
pub(crate) fn signed_pow<T: Scalar>(x: T, p: T) -> T {
    let a = x.abs();
    if a == T::zero() {
        T::zero()
    } else {
        a.powf(p - T::one()) * x.signum()
    }
}
