//! Exact non-negative rationals for pruning parameters and score averages.
//!
//! Pruning decisions compare expressions like `mu * bound <= theta`. Holding
//! `mu`, `eta`, and `beta` as integer fractions and cross-multiplying in
//! `u128` keeps every decision exact; no float boundary can flip a
//! prune/visit outcome between runs or platforms.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// A non-negative rational `num / den` with `den > 0`, stored reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ratio {
    num: u64,
    den: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

impl Ratio {
    pub const ZERO: Ratio = Ratio { num: 0, den: 1 };
    pub const ONE: Ratio = Ratio { num: 1, den: 1 };

    pub fn new(num: u64, den: u64) -> Result<Ratio> {
        if den == 0 {
            return Err(Error::InvalidParameter("ratio denominator is zero".into()));
        }
        let g = gcd(num, den);
        Ok(Ratio {
            num: num / g,
            den: den / g,
        })
    }

    /// Parse a non-negative decimal literal such as `"1"`, `"0.4"`, or `".25"`.
    pub fn parse_decimal(s: &str) -> Result<Ratio> {
        let s = s.trim();
        let bad = || Error::InvalidParameter(format!("{s:?} is not a non-negative decimal"));
        if s.is_empty() || s.starts_with('+') || s.starts_with('-') {
            return Err(bad());
        }
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part.chars().all(|c| c.is_ascii_digit())
            || !frac_part.chars().all(|c| c.is_ascii_digit())
        {
            return Err(bad());
        }
        if frac_part.len() > 18 {
            return Err(Error::InvalidParameter(format!(
                "{s:?} has more than 18 fractional digits"
            )));
        }
        let int_val: u64 = if int_part.is_empty() {
            0
        } else {
            int_part
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("{s:?} is out of range")))?
        };
        let den = 10u64
            .checked_pow(frac_part.len() as u32)
            .ok_or_else(bad)?;
        let frac_val: u64 = if frac_part.is_empty() {
            0
        } else {
            frac_part
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("{s:?} is out of range")))?
        };
        let num = int_val
            .checked_mul(den)
            .and_then(|v| v.checked_add(frac_val))
            .ok_or_else(|| Error::InvalidParameter(format!("{s:?} is out of range")))?;
        Ratio::new(num, den)
    }

    /// Nearest fraction with denominator 10^6; for callers that only have an f64.
    pub fn from_f64_approx(v: f64) -> Result<Ratio> {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{v} is not a non-negative finite value"
            )));
        }
        const DEN: u64 = 1_000_000;
        let num = (v * DEN as f64).round();
        if num > u64::MAX as f64 {
            return Err(Error::InvalidParameter(format!("{v} is out of range")));
        }
        Ratio::new(num as u64, DEN)
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn is_one(&self) -> bool {
        self.num == self.den
    }

    /// Compare `self * value` against `rhs`, exactly.
    pub fn times_cmp(&self, value: u64, rhs: u64) -> Ordering {
        let lhs = self.num as u128 * value as u128;
        let rhs = self.den as u128 * rhs as u128;
        lhs.cmp(&rhs)
    }

    /// Compare `self * value` against `rhs_factor * rhs`, exactly.
    pub fn times_cmp_scaled(&self, value: u64, rhs_factor: u64, rhs: u64) -> Ordering {
        let lhs = self.num as u128 * value as u128;
        let rhs = self.den as u128 * rhs_factor as u128 * rhs as u128;
        lhs.cmp(&rhs)
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Ratio) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Ratio) -> Ordering {
        let lhs = self.num as u128 * other.den as u128;
        let rhs = other.num as u128 * self.den as u128;
        lhs.cmp(&rhs)
    }
}

impl fmt::Display for Ratio {
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
    fn parses_decimal_forms() {
        assert_eq!(Ratio::parse_decimal("1").unwrap(), Ratio::ONE);
        assert_eq!(Ratio::parse_decimal("0.4").unwrap(), Ratio::new(2, 5).unwrap());
        assert_eq!(Ratio::parse_decimal(".25").unwrap(), Ratio::new(1, 4).unwrap());
        assert_eq!(Ratio::parse_decimal("1.0").unwrap(), Ratio::ONE);
        assert_eq!(Ratio::parse_decimal("0.125").unwrap(), Ratio::new(1, 8).unwrap());
    }

    #[test]
    fn rejects_bad_decimals() {
        for s in ["", "-0.4", "+1", "abc", "1.2.3", "0..4", "."] {
            assert!(Ratio::parse_decimal(s).is_err(), "{s:?} should be rejected");
        }
    }

    #[test]
    fn cross_multiplied_comparisons() {
        let mu = Ratio::new(1, 2).unwrap();
        // 0.5 * 34 = 17 vs 18
        assert_eq!(mu.times_cmp(34, 18), Ordering::Less);
        assert_eq!(mu.times_cmp(36, 18), Ordering::Equal);
        assert_eq!(mu.times_cmp(37, 18), Ordering::Greater);
        // 1 * 44 vs 2 * 18 = 36
        let eta = Ratio::ONE;
        assert_eq!(eta.times_cmp_scaled(44, 2, 18), Ordering::Greater);
    }

    #[test]
    fn ordering_between_ratios() {
        let a = Ratio::parse_decimal("0.4").unwrap();
        let b = Ratio::parse_decimal("0.6").unwrap();
        assert!(a < b);
        assert!(b <= Ratio::ONE);
        assert_eq!(Ratio::new(2, 4).unwrap(), Ratio::new(1, 2).unwrap());
    }
}
