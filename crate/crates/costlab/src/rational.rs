//! Nonnegative exact rationals.
//!
//! Every cost, weight and measure in the crate is a [`Rational`]. The type
//! cannot hold a negative value, so a cost function built from it is
//! nonnegative by construction. Signed intermediate quantities use
//! [`num::BigRational`] directly.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul};
use std::str::FromStr;

use num::bigint::{BigInt, BigUint, Sign};
use num::{BigRational, One, Signed, ToPrimitive, Zero};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rational(BigRational);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RationalError {
    #[error("negative value {0}")]
    Negative(String),
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("malformed rational `{0}`")]
    Malformed(String),
}

impl Rational {
    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn from_int(n: u64) -> Self {
        Rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn new(num: u64, den: u64) -> Result<Self, RationalError> {
        if den == 0 {
            return Err(RationalError::ZeroDenominator);
        }
        Ok(Rational(BigRational::new(num.into(), den.into())))
    }

    pub fn from_big(num: BigUint, den: BigUint) -> Result<Self, RationalError> {
        if den.is_zero() {
            return Err(RationalError::ZeroDenominator);
        }
        Ok(Rational(BigRational::new(BigInt::from_biguint(Sign::Plus, num), BigInt::from_biguint(Sign::Plus, den))))
    }

    /// Accepts a signed rational, rejecting negatives.
    pub fn from_signed(q: BigRational) -> Result<Self, RationalError> {
        if q.is_negative() {
            Err(RationalError::Negative(q.to_string()))
        } else {
            Ok(Rational(q))
        }
    }

    /// `2^{-k}`.
    pub fn pow2_neg(k: u32) -> Self {
        Rational(BigRational::new(BigInt::one(), BigInt::one() << k as usize))
    }

    /// `2^{k}`.
    pub fn pow2(k: u32) -> Self {
        Rational(BigRational::from_integer(BigInt::one() << k as usize))
    }

    /// `3^{-k}`.
    pub fn pow3_neg(k: u32) -> Self {
        Rational(BigRational::new(BigInt::one(), num::pow(BigInt::from(3u8), k as usize)))
    }

    /// `units · 2^{-exp}`.
    pub fn dyadic(units: u128, exp: u32) -> Self {
        Rational(BigRational::new(BigInt::from(units), BigInt::one() << exp as usize))
    }

    pub fn as_big(&self) -> &BigRational {
        &self.0
    }

    pub fn into_big(self) -> BigRational {
        self.0
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn checked_sub(&self, other: &Rational) -> Option<Rational> {
        if other.0 > self.0 {
            None
        } else {
            Some(Rational(&self.0 - &other.0))
        }
    }

    /// Truncated subtraction: `max(self - other, 0)`.
    pub fn monus(&self, other: &Rational) -> Rational {
        self.checked_sub(other).unwrap_or_else(Rational::zero)
    }

    pub fn signed_sub(&self, other: &Rational) -> BigRational {
        &self.0 - &other.0
    }

    pub fn mul_int(&self, n: u64) -> Rational {
        Rational(&self.0 * BigRational::from_integer(BigInt::from(n)))
    }

    pub fn max_of(a: Rational, b: Rational) -> Rational {
        if a >= b {
            a
        } else {
            b
        }
    }

    /// `⌈self / other⌉` for positive `other`.
    pub fn ceil_div(&self, other: &Rational) -> Option<BigUint> {
        if other.is_zero() {
            return None;
        }
        let q = (&self.0 / &other.0).ceil();
        q.to_integer().to_biguint()
    }

    /// Least `r` with `2^{-r} ≤ self`, for `0 < self`. Values above 1 give 0.
    pub fn least_pow2_exponent_below(&self) -> Option<u32> {
        if self.is_zero() {
            return None;
        }
        if self.0 >= BigRational::one() {
            return Some(0);
        }
        // 2^{-r} ≤ n/d  iff  d ≤ n·2^r
        let n = self.numer();
        let d = self.denom();
        let mut r = (d.bits() as i64 - n.bits() as i64 - 1).max(0) as u32;
        while (n << r as usize) < *d {
            r += 1;
        }
        while r > 0 && (n << (r - 1) as usize) >= *d {
            r -= 1;
        }
        Some(r)
    }

    /// Least `k` with `self ≤ 2^k` (0 for values ≤ 1).
    pub fn least_pow2_above(&self) -> u32 {
        let mut k = 0u32;
        let mut p = BigRational::one();
        while self.0 > p {
            p *= BigRational::from_integer(BigInt::from(2u8));
            k += 1;
        }
        k
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// `(numerator, denominator)` as decimal strings, for CSV export.
    pub fn parts(&self) -> (String, String) {
        (self.numer().to_string(), self.denom().to_string())
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = RationalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || RationalError::Malformed(s.to_string());
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s, "1"),
        };
        let n: BigUint = n.parse().map_err(|_| bad())?;
        let d: BigUint = d.parse().map_err(|_| bad())?;
        Rational::from_big(n, d)
    }
}

impl Add for Rational {
    type Output = Rational;
    fn add(self, rhs: Rational) -> Rational {
        Rational(self.0 + rhs.0)
    }
}

impl<'a> Add<&'a Rational> for &'a Rational {
    type Output = Rational;
    fn add(self, rhs: &'a Rational) -> Rational {
        Rational(&self.0 + &rhs.0)
    }
}

impl<'a> Add<&'a Rational> for Rational {
    type Output = Rational;
    fn add(self, rhs: &'a Rational) -> Rational {
        Rational(self.0 + &rhs.0)
    }
}

impl AddAssign<&Rational> for Rational {
    fn add_assign(&mut self, rhs: &Rational) {
        self.0 += &rhs.0;
    }
}

impl AddAssign for Rational {
    fn add_assign(&mut self, rhs: Rational) {
        self.0 += rhs.0;
    }
}

impl Mul for Rational {
    type Output = Rational;
    fn mul(self, rhs: Rational) -> Rational {
        Rational(self.0 * rhs.0)
    }
}

impl<'a> Mul<&'a Rational> for &'a Rational {
    type Output = Rational;
    fn mul(self, rhs: &'a Rational) -> Rational {
        Rational(&self.0 * &rhs.0)
    }
}

impl Div for Rational {
    type Output = Rational;
    /// Panics on division by zero, like integer division.
    fn div(self, rhs: Rational) -> Rational {
        Rational(self.0 / rhs.0)
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |a, b| a + b)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |a, b| a + b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_rejected() {
        let q = BigRational::new(BigInt::from(-1), BigInt::from(2));
        assert!(Rational::from_signed(q).is_err());
    }

    #[test]
    fn parse_and_display_roundtrip() {
        for s in ["0", "3", "1/2", "7/8", "12/8"] {
            let q: Rational = s.parse().unwrap();
            let back: Rational = q.to_string().parse().unwrap();
            assert_eq!(q, back);
        }
        assert_eq!("12/8".parse::<Rational>().unwrap().to_string(), "3/2");
        assert!("1/0".parse::<Rational>().is_err());
        assert!("-1/2".parse::<Rational>().is_err());
    }

    #[test]
    fn least_exponent() {
        let cases = [(1u64, 1u64, 0u32), (1, 2, 1), (3, 16, 3), (1, 3, 2), (5, 8, 1), (2, 1, 0)];
        for (n, d, r) in cases {
            let q = Rational::new(n, d).unwrap();
            let got = q.least_pow2_exponent_below().unwrap();
            assert_eq!(got, r, "{n}/{d}");
            assert!(Rational::pow2_neg(got) <= q);
            if got > 0 {
                assert!(Rational::pow2_neg(got - 1) > q);
            }
        }
    }

    #[test]
    fn ceil_div_and_pow2_above() {
        let a = Rational::new(7, 2).unwrap();
        let b = Rational::one();
        assert_eq!(a.ceil_div(&b).unwrap(), BigUint::from(4u8));
        assert_eq!(Rational::new(3, 2).unwrap().least_pow2_above(), 1);
        assert_eq!(Rational::one().least_pow2_above(), 0);
        assert_eq!(Rational::from_int(5).least_pow2_above(), 3);
    }

    #[test]
    fn dyadic_matches_pow2() {
        assert_eq!(Rational::dyadic(3, 4), Rational::new(3, 16).unwrap());
        assert_eq!(Rational::pow2_neg(0), Rational::one());
        assert_eq!(Rational::pow3_neg(2), Rational::new(1, 9).unwrap());
    }
}
