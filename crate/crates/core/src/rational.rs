//! Exact rational arithmetic for accuracy metrics.
//!
//! Success predicates and quantile errors compare empirical CDF values (small
//! integer counts over n) against targets like 1/2 ± 1/25. Doing this in
//! floating point would make boundary cases tolerance-dependent, so metrics
//! use this exact type throughout. Comparisons cross-multiply in i128, which
//! cannot overflow for the population sizes this crate targets (n ≤ ~10^12).

use std::cmp::Ordering;
use std::fmt;

use crate::error::{invalid, Result};

/// A reduced fraction with positive denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rational {
    num: i64,
    den: i64,
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.abs().max(1)
}

impl Rational {
    pub fn new(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(invalid("rational with zero denominator"));
        }
        let sign = if den < 0 { -1 } else { 1 };
        let g = gcd(num, den);
        Ok(Self {
            num: sign * num / g,
            den: sign * den / g,
        })
    }

    pub const fn zero() -> Self {
        Self { num: 0, den: 1 }
    }

    pub const fn one() -> Self {
        Self { num: 1, den: 1 }
    }

    pub fn from_integer(n: i64) -> Self {
        Self { num: n, den: 1 }
    }

    /// Parses a plain decimal literal (`"0.04"`, `"1/25"`, `"0.5"`) exactly.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((a, b)) = s.split_once('/') {
            let num: i64 = a
                .trim()
                .parse()
                .map_err(|_| invalid(format!("bad rational {s:?}")))?;
            let den: i64 = b
                .trim()
                .parse()
                .map_err(|_| invalid(format!("bad rational {s:?}")))?;
            return Self::new(num, den);
        }
        let neg = s.starts_with('-');
        let body = s.trim_start_matches(['-', '+']);
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if frac_part.len() > 15 {
            return Err(invalid(format!("decimal {s:?} has too many digits")));
        }
        let int_val: i64 = if int_part.is_empty() {
            0
        } else {
            int_part
                .parse()
                .map_err(|_| invalid(format!("bad decimal {s:?}")))?
        };
        let scale = 10i64.pow(frac_part.len() as u32);
        let frac_val: i64 = if frac_part.is_empty() {
            0
        } else {
            frac_part
                .parse()
                .map_err(|_| invalid(format!("bad decimal {s:?}")))?
        };
        let num = int_val
            .checked_mul(scale)
            .and_then(|v| v.checked_add(frac_val))
            .ok_or_else(|| invalid(format!("decimal {s:?} out of range")))?;
        Self::new(if neg { -num } else { num }, scale)
    }

    pub fn numer(&self) -> i64 {
        self.num
    }

    pub fn denom(&self) -> i64 {
        self.den
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn abs(&self) -> Self {
        Self {
            num: self.num.abs(),
            den: self.den,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let num = self.num as i128 * other.den as i128 + other.num as i128 * self.den as i128;
        let den = self.den as i128 * other.den as i128;
        Self::from_i128(num, den)
    }

    pub fn sub(&self, other: &Self) -> Self {
        let num = self.num as i128 * other.den as i128 - other.num as i128 * self.den as i128;
        let den = self.den as i128 * other.den as i128;
        Self::from_i128(num, den)
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self::from_i128(
            self.num as i128 * other.num as i128,
            self.den as i128 * other.den as i128,
        )
    }

    fn from_i128(num: i128, den: i128) -> Self {
        fn gcd128(mut a: i128, mut b: i128) -> i128 {
            while b != 0 {
                (a, b) = (b, a % b);
            }
            a.abs().max(1)
        }
        let sign = if den < 0 { -1 } else { 1 };
        let g = gcd128(num, den);
        let num = sign * num / g;
        let den = sign * den / g;
        debug_assert!(num.abs() <= i64::MAX as i128 && den <= i64::MAX as i128);
        Self {
            num: num as i64,
            den: den as i64,
        }
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as i128 * other.den as i128).cmp(&(other.num as i128 * self.den as i128))
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_decimals() {
        assert_eq!(Rational::parse("0.04").unwrap(), Rational::new(1, 25).unwrap());
        assert_eq!(Rational::parse("0.5").unwrap(), Rational::new(1, 2).unwrap());
        assert_eq!(Rational::parse("1/25").unwrap(), Rational::new(1, 25).unwrap());
        assert_eq!(Rational::parse("2").unwrap(), Rational::from_integer(2));
        assert_eq!(Rational::parse("-0.25").unwrap(), Rational::new(-1, 4).unwrap());
        assert!(Rational::parse("x").is_err());
        assert!(Rational::new(1, 0).is_err());
    }

    #[test]
    fn ordering_is_exact() {
        let a = Rational::new(1, 3).unwrap();
        let b = Rational::new(333_333_333, 1_000_000_000).unwrap();
        assert!(b < a);
        assert!(a.sub(&b) > Rational::zero());
    }

    #[test]
    fn arithmetic_reduces() {
        let a = Rational::new(1, 4).unwrap();
        let b = Rational::new(1, 4).unwrap();
        assert_eq!(a.add(&b), Rational::new(1, 2).unwrap());
        assert_eq!(a.sub(&b), Rational::zero());
        assert_eq!(a.mul(&Rational::from_integer(8)), Rational::from_integer(2));
    }
}
