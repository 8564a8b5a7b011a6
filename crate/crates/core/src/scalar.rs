//! Field abstraction shared by the floating-point and exact-rational code paths.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// An ordered field with a notion of "numerically zero".
///
/// `f64` treats magnitudes below [`Scalar::tolerance`] as zero; `BigRational`
/// is exact and its tolerance is zero.
pub trait Scalar:
    Clone
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    fn zero() -> Self;
    fn one() -> Self;
    /// Converts exactly where the representation allows (every finite `f64` is a dyadic rational).
    fn from_f64(x: f64) -> Self;
    fn from_i64(x: i64) -> Self;
    fn to_f64(&self) -> f64;
    fn tolerance() -> Self;
    fn abs(&self) -> Self;

    fn is_zero_tol(&self) -> bool {
        self.abs() <= Self::tolerance()
    }
    fn is_pos_tol(&self) -> bool {
        *self > Self::tolerance()
    }
    fn is_neg_tol(&self) -> bool {
        *self < -Self::tolerance()
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn from_i64(x: i64) -> Self {
        x as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn tolerance() -> Self {
        1e-10
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
}

impl Scalar for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("finite payoff value")
    }
    fn from_i64(x: i64) -> Self {
        BigRational::from_integer(BigInt::from(x))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn tolerance() -> Self {
        Zero::zero()
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
}

/// Converts a slice of `f64` into another scalar type.
pub fn convert_vec<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::from_f64(x)).collect()
}

pub fn to_f64_vec<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(Scalar::to_f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_conversion_is_exact_for_dyadics() {
        let q = <BigRational as Scalar>::from_f64(0.25);
        assert_eq!(q, BigRational::new(BigInt::from(1), BigInt::from(4)));
        assert_eq!(Scalar::to_f64(&q), 0.25);
    }

    #[test]
    fn tolerance_semantics() {
        assert!(1e-12_f64.is_zero_tol());
        assert!(!1e-6_f64.is_zero_tol());
        let tiny = BigRational::new(BigInt::from(1), BigInt::from(10).pow(30));
        assert!(!tiny.is_zero_tol());
        assert!(tiny.is_pos_tol());
    }
}
