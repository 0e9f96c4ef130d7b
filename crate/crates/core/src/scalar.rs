//! Scalar abstraction shared by the analytic modules.
//!
//! Load coefficients, drifts and the region classifier are rational
//! functions of the model rates, so they are written once over [`Scalar`]
//! and instantiated with `f64`, `f32`, or an exact rational type. Exact
//! instantiations use a zero tolerance, which makes every sign decision
//! (and therefore every boundary flag) exact.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

pub trait Scalar:
    Clone + Debug + Display + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Relative tolerance used when deciding whether a discriminant is zero.
    fn tolerance() -> Self;

    /// `false` for NaN and infinities; exact types are always finite.
    fn is_finite_value(&self) -> bool;

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to every scalar type")
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn tolerance() -> Self {
        1e-9
    }

    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for f32 {
    // 1e-9 is below f32 resolution; a few hundred ulps is the practical floor.
    fn tolerance() -> Self {
        1e-5
    }

    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for BigRational {
    fn tolerance() -> Self {
        Ratio::from_integer(BigInt::from(0))
    }

    fn is_finite_value(&self) -> bool {
        true
    }
}

/// `|value| <= tolerance * scale`, with a zero scale meaning exact zero.
pub fn near_zero<S: Scalar>(value: &S, scale: &S) -> bool {
    value.abs() <= S::tolerance() * scale.abs()
}

/// Builds an exact rational from a numerator and denominator.
pub fn ratio(numer: i64, denom: i64) -> BigRational {
    BigRational::new(BigInt::from(numer), BigInt::from(denom))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_zero_has_no_slack() {
        let tiny = ratio(1, 1_000_000_000_000);
        assert!(!near_zero(&tiny, &ratio(1, 1)));
        assert!(near_zero(&ratio(0, 1), &ratio(1, 1)));
    }

    #[test]
    fn float_tolerance_is_relative() {
        assert!(near_zero(&1e-10, &1.0));
        assert!(!near_zero(&1e-10, &1e-3));
        assert!(!near_zero(&1e-3f32, &1.0));
    }
}
