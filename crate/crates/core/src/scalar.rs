//! Scalar abstraction shared by the estimators and the linear solver.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type the estimators can run on: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + FromStr + Send + Sync + 'static
{
    /// Relative pivot tolerance used by the rank checks.
    ///
    /// Fixed at 1e-10 where the type can represent it; `f32` falls back to a
    /// multiple of its machine epsilon.
    fn rank_tolerance() -> Self {
        let fixed = Self::from_f64(1e-10).unwrap();
        let floor = Self::epsilon() * Self::from_f64(16.0).unwrap();
        fixed.max(floor)
    }

    fn lit(v: f64) -> Self {
        Self::from_f64(v).unwrap()
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).unwrap()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub(crate) fn mean<T: Scalar>(values: impl ExactSizeIterator<Item = T>) -> T {
    let n = values.len();
    values.sum::<T>() / T::from_count(n)
}
