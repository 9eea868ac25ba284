//! Exact rational exponents.
//!
//! Exponents of generalized power series are arbitrary-precision rationals
//! kept in lowest terms. [`Exp`] wraps `num_rational::BigRational` and fixes
//! the textual format `"n/d"` used everywhere (JSON, CLI, Display).

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// A reduced arbitrary-precision rational exponent.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exp(BigRational);

impl Exp {
    /// The exponent zero.
    pub fn zero() -> Self {
        Exp(BigRational::zero())
    }

    /// The exponent one.
    pub fn one() -> Self {
        Exp(BigRational::one())
    }

    /// Exponent from an integer.
    pub fn from_int(n: i64) -> Self {
        Exp(BigRational::from_integer(BigInt::from(n)))
    }

    /// Exponent `num/den`. Panics if `den == 0`.
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "exponent denominator must be nonzero");
        Exp(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    /// Exponent from a raw rational.
    pub fn from_rational(r: BigRational) -> Self {
        Exp(r)
    }

    /// Underlying rational.
    pub fn rational(&self) -> &BigRational {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    /// Largest integer `<= self`.
    pub fn floor_int(&self) -> BigInt {
        self.0.floor().to_integer()
    }

    /// Smallest integer `>= self`.
    pub fn ceil_int(&self) -> BigInt {
        self.0.ceil().to_integer()
    }

    /// Ceiling clamped into `u32`, for integer precision budgets.
    pub fn ceil_u32(&self) -> u32 {
        let c = self.ceil_int();
        if c.is_negative() {
            0
        } else {
            c.to_u32().unwrap_or(u32::MAX)
        }
    }

    /// `self * n` for a machine integer `n`.
    pub fn scale(&self, n: i64) -> Self {
        Exp(&self.0 * BigRational::from_integer(BigInt::from(n)))
    }

    /// `self / n`. Panics if `n == 0`.
    pub fn div_int(&self, n: i64) -> Self {
        assert!(n != 0);
        Exp(&self.0 / BigRational::from_integer(BigInt::from(n)))
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// Parses `"n"`, `"n/d"`, or `"-n/d"`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let (num_s, den_s) = match s.split_once('/') {
            Some((a, b)) => (a, b),
            None => (s, "1"),
        };
        let num: BigInt = num_s
            .parse()
            .map_err(|_| Error::Parse(format!("bad exponent numerator in {s:?}")))?;
        let den: BigInt = den_s
            .parse()
            .map_err(|_| Error::Parse(format!("bad exponent denominator in {s:?}")))?;
        if den.is_zero() {
            return Err(Error::Parse(format!("zero denominator in exponent {s:?}")));
        }
        Ok(Exp(BigRational::new(num, den)))
    }
}

impl fmt::Display for Exp {
    /// Canonical form is always `n/d`, including `d = 1`, so that emitted
    /// output is byte-stable regardless of how the value was produced.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl fmt::Debug for Exp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl Add for &Exp {
    type Output = Exp;
    fn add(self, rhs: &Exp) -> Exp {
        Exp(&self.0 + &rhs.0)
    }
}

impl Sub for &Exp {
    type Output = Exp;
    fn sub(self, rhs: &Exp) -> Exp {
        Exp(&self.0 - &rhs.0)
    }
}

impl Mul for &Exp {
    type Output = Exp;
    fn mul(self, rhs: &Exp) -> Exp {
        Exp(&self.0 * &rhs.0)
    }
}

impl Neg for &Exp {
    type Output = Exp;
    fn neg(self) -> Exp {
        Exp(-&self.0)
    }
}

impl AddAssign<&Exp> for Exp {
    fn add_assign(&mut self, rhs: &Exp) {
        self.0 += &rhs.0;
    }
}

/// A valuation that is either exactly known or only bounded below by the
/// precision of the data it was read from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Valuation {
    /// The minimum exponent of a nonzero term.
    Finite(Exp),
    /// No nonzero term below this bound; the true valuation may be larger.
    AtLeast(Exp),
}

impl Valuation {
    /// The bound itself, ignoring whether it is exact.
    pub fn bound(&self) -> &Exp {
        match self {
            Valuation::Finite(e) | Valuation::AtLeast(e) => e,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Valuation::Finite(_))
    }

    /// Adds an exponent offset, preserving exactness.
    pub fn shift(&self, by: &Exp) -> Valuation {
        match self {
            Valuation::Finite(e) => Valuation::Finite(e + by),
            Valuation::AtLeast(e) => Valuation::AtLeast(e + by),
        }
    }

    /// Whether the valuation is certainly `>= target`.
    pub fn at_least(&self, target: &Exp) -> bool {
        self.bound() >= target
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(e) => write!(f, "{e}"),
            Valuation::AtLeast(e) => write!(f, ">={e}"),
        }
    }
}

/// Orders by bound; used when picking the smallest slope among candidates.
impl PartialOrd for Valuation {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.bound().cmp(other.bound()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduces_to_lowest_terms() {
        assert_eq!(Exp::new(2, 4), Exp::new(1, 2));
        assert_eq!(Exp::new(-3, -6), Exp::new(1, 2));
        assert_eq!(Exp::new(3, -6).to_string(), "-1/2");
    }

    #[test]
    fn parse_round_trip() {
        for s in ["0/1", "5/1", "-7/3", "1/2"] {
            assert_eq!(Exp::parse(s).unwrap().to_string(), s);
        }
        assert_eq!(Exp::parse("4").unwrap(), Exp::from_int(4));
        assert!(Exp::parse("1/0").is_err());
        assert!(Exp::parse("x/2").is_err());
    }

    #[test]
    fn floor_and_ceil() {
        assert_eq!(Exp::new(7, 2).floor_int(), BigInt::from(3));
        assert_eq!(Exp::new(7, 2).ceil_int(), BigInt::from(4));
        assert_eq!(Exp::new(-1, 2).floor_int(), BigInt::from(-1));
        assert_eq!(Exp::new(-1, 2).ceil_u32(), 0);
        assert_eq!(Exp::from_int(6).ceil_u32(), 6);
    }

    #[test]
    fn valuation_ordering_and_shift() {
        let v = Valuation::Finite(Exp::new(1, 2));
        let w = Valuation::AtLeast(Exp::from_int(3));
        assert!(v < w);
        assert_eq!(
            v.shift(&Exp::new(1, 2)),
            Valuation::Finite(Exp::from_int(1))
        );
        assert!(w.at_least(&Exp::from_int(3)));
        assert!(!w.at_least(&Exp::from_int(4)));
    }
}
