//! Number types the model and the reference solver are generic over.
//!
//! Floating types carry explicit tolerances. Exact rationals compare with a
//! zero tolerance, so a solve over [`Rational`] is a certificate rather than an
//! approximation.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// Arbitrary-precision rational used for exact solves.
pub type Rational = BigRational;

pub trait Scalar:
    Clone + Debug + Display + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync
{
    /// Absolute tolerance below which a pivot or reduced cost is treated as zero.
    fn zero_tol() -> Self;

    /// Distance from an integer below which a value counts as integral.
    fn int_tol() -> Self;

    /// `true` for exact arithmetic.
    fn is_exact() -> bool;

    /// Lossless for rationals, nearest-representable for floats.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite value")
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn is_near_zero(&self) -> bool {
        self.abs() <= Self::zero_tol()
    }

    fn max_of(a: Self, b: Self) -> Self {
        if a >= b { a } else { b }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if a <= b { a } else { b }
    }
}

impl Scalar for f64 {
    fn zero_tol() -> Self {
        1e-9
    }
    fn int_tol() -> Self {
        1e-6
    }
    fn is_exact() -> bool {
        false
    }
}

impl Scalar for f32 {
    fn zero_tol() -> Self {
        1e-5
    }
    fn int_tol() -> Self {
        1e-4
    }
    fn is_exact() -> bool {
        false
    }
}

impl Scalar for BigRational {
    fn zero_tol() -> Self {
        BigRational::from_integer(BigInt::from(0))
    }
    fn int_tol() -> Self {
        BigRational::from_integer(BigInt::from(0))
    }
    fn is_exact() -> bool {
        true
    }
}

/// Fractional distance to the nearest integer, in `[0, 0.5]`.
pub fn fractionality<S: Scalar>(v: &S) -> S {
    let lo = floor(v);
    let up = v.clone() - lo;
    let down = S::one() - up.clone();
    S::min_of(up, down)
}

/// Floor that works for every [`Scalar`] without requiring `Float`.
pub fn floor<S: Scalar>(v: &S) -> S {
    let approx = v.to_f64_lossy().floor();
    let mut f = S::from_f64_lossy(approx);
    // f64 rounding on huge rationals can be off by one either way.
    while f > *v {
        f = f - S::one();
    }
    while f.clone() + S::one() <= *v {
        f = f + S::one();
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_is_exact_from_f64() {
        let third = Rational::from_f64_lossy(0.1);
        assert_eq!(third.to_f64_lossy(), 0.1);
        assert!(num_traits::Zero::is_zero(&Rational::zero_tol()));
    }

    #[test]
    fn fractionality_is_symmetric() {
        assert!((fractionality(&2.25f64) - 0.25).abs() < 1e-15);
        assert!((fractionality(&2.75f64) - 0.25).abs() < 1e-15);
        assert!((fractionality(&-0.25f64) - 0.25).abs() < 1e-15);
        let half = Rational::new(BigInt::from(7), BigInt::from(2));
        assert_eq!(fractionality(&half), Rational::new(BigInt::from(1), BigInt::from(2)));
    }
}
