//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type the process algebra is computed in.
///
/// The associated constants carry the default tolerances, which have to
/// scale with the precision of the type.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Tolerance for row-sum and probability-vector checks.
    const STOCHASTIC_TOL: f64;
    /// A series is truncated once its current term falls below this.
    const SERIES_EPS: f64;
    /// Default target for `|phi(rho) - 1|` in the Perron root solver.
    const ROOT_TOL: f64;

    /// Converts an `f64` literal. Panics only for types that cannot hold
    /// ordinary finite numbers, which no implementor does.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const STOCHASTIC_TOL: f64 = 1e-12;
    const SERIES_EPS: f64 = 1e-15;
    const ROOT_TOL: f64 = 1e-14;
}

impl Scalar for f32 {
    const STOCHASTIC_TOL: f64 = 1e-5;
    const SERIES_EPS: f64 = 1e-7;
    const ROOT_TOL: f64 = 1e-6;
}

/// Maximum absolute componentwise difference between two vectors.
pub fn max_abs_diff<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc.max((x - y).abs()))
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}
