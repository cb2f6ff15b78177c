//! Scalar backends.
//!
//! Every measure, operator and statistic in this crate is generic over
//! [`Scalar`]. Two families are provided: IEEE floats (`f32`, `f64`) for
//! long sweeps, and [`Rational`] (arbitrary precision) for suites that must
//! hold exactly.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// Arbitrary-precision rational numbers.
pub type Rational = BigRational;

/// Numeric backend for masses, transition probabilities and distances.
pub trait Scalar:
    Num + Signed + Clone + Debug + Display + PartialOrd + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// `true` when arithmetic is exact and equality checks ignore tolerances.
    const EXACT: bool;

    /// The ratio `num / den`. Panics if `den == 0`.
    fn ratio(num: i64, den: i64) -> Self;

    fn from_rational(q: &Rational) -> Self;

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar")
    }

    fn as_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Equality up to `tol` (ignored for exact backends).
    fn approx_eq(&self, other: &Self, tol: Tolerance) -> bool {
        if Self::EXACT {
            self == other
        } else {
            (self.clone() - other.clone()).abs().as_f64() <= tol.epsilon
        }
    }

    /// `self <= other` up to `tol` (ignored for exact backends).
    fn approx_le(&self, other: &Self, tol: Tolerance) -> bool {
        if Self::EXACT {
            self <= other
        } else {
            (self.clone() - other.clone()).as_f64() <= tol.epsilon
        }
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        num as f64 / den as f64
    }

    fn from_rational(q: &Rational) -> Self {
        q.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    const EXACT: bool = false;

    fn ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        (num as f64 / den as f64) as f32
    }

    fn from_rational(q: &Rational) -> Self {
        q.to_f32().unwrap_or(f32::NAN)
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_rational(q: &Rational) -> Self {
        q.clone()
    }
}

/// Absolute tolerance for float-mode equality checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub epsilon: f64,
}

impl Tolerance {
    pub const DEFAULT_EPSILON: f64 = 1e-9;

    pub fn new(epsilon: f64) -> Self {
        assert!(epsilon >= 0.0 && epsilon.is_finite(), "tolerance must be finite and >= 0");
        Tolerance { epsilon }
    }

    pub fn exact() -> Self {
        Tolerance { epsilon: 0.0 }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { epsilon: Self::DEFAULT_EPSILON }
    }
}

/// Integer power by repeated multiplication.
pub fn pow<S: Scalar>(base: &S, exp: usize) -> S {
    let mut acc = S::one();
    for _ in 0..exp {
        acc = acc * base.clone();
    }
    acc
}

pub(crate) fn is_one<S: Scalar>(x: &S, tol: Tolerance) -> bool {
    x.approx_eq(&S::one(), tol)
}

pub(crate) fn max_of<S: Scalar>(a: S, b: S) -> S {
    if b > a {
        b
    } else {
        a
    }
}

pub(crate) fn sum<S: Scalar, I: IntoIterator<Item = S>>(it: I) -> S {
    it.into_iter().fold(S::zero(), |acc, x| acc + x)
}

pub(crate) fn zero_or_positive<S: Scalar>(x: &S) -> bool {
    x.is_zero() || x.is_positive()
}
