//! Exact money and fraction arithmetic.
//!
//! Money is an integer count of micro-units (10⁻⁶ of one currency unit).
//! Fractions are decimals with at most nine fractional digits, stored as
//! parts per billion, so values read from a scenario file are exact.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub};
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{Integer, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Micro-units per currency unit.
pub const MICROS_PER_UNIT: i64 = 1_000_000;

/// An amount of money in micro-units of the settlement currency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Money(pub i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn micros(self) -> i64 {
        self.0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn to_rational(self) -> BigRational {
        BigRational::from_integer(BigInt::from(self.0))
    }

    /// `self × count`, panicking on overflow (amounts in a scenario stay far below i64::MAX).
    pub fn times(self, count: u64) -> Money {
        let v = i128::from(self.0) * i128::from(count);
        Money(i64::try_from(v).expect("money overflow"))
    }

    /// Rounds an exact rational amount half-up to whole micro-units.
    pub fn round_rational(r: &BigRational) -> Money {
        let rounded = round_half_up(r);
        Money(rounded.to_i64().expect("money overflow"))
    }

    /// Exact `self × num / den`, rounded half-up.
    pub fn mul_div_round(self, num: i128, den: i128) -> Money {
        Money(i64::try_from(div_round_half_up(i128::from(self.0) * num, den)).expect("money overflow"))
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0.checked_add(rhs.0).expect("money overflow"))
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        *self = *self + rhs;
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0.checked_sub(rhs.0).expect("money overflow"))
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `num / den` rounded half toward positive infinity. `den` must be positive.
pub fn div_round_half_up(num: i128, den: i128) -> i128 {
    assert!(den > 0, "non-positive denominator");
    (2 * num + den).div_euclid(2 * den)
}

/// Rounds a rational half toward positive infinity.
pub fn round_half_up(r: &BigRational) -> BigInt {
    let two = BigInt::from(2);
    let num = r.numer() * &two + r.denom();
    let den = r.denom() * &two;
    num.div_floor(&den)
}

/// Smallest integer not below `r`.
pub fn ceil_rational(r: &BigRational) -> BigInt {
    r.ceil().to_integer()
}

/// Formats a non-negative rational with a fixed number of decimals (half-up).
pub fn format_rational(r: &BigRational, decimals: u32) -> String {
    let scale = BigInt::from(10u64).pow(decimals);
    let scaled = round_half_up(&(r * BigRational::from_integer(scale.clone())));
    let negative = scaled.is_negative();
    let abs = scaled.abs();
    let (int, frac) = abs.div_rem(&scale);
    let sign = if negative { "-" } else { "" };
    if decimals == 0 {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{:0>width$}", frac.to_string(), width = decimals as usize)
    }
}

const PPB: i64 = 1_000_000_000;

/// An exact decimal fraction with up to nine fractional digits.
///
/// Serialized as a decimal string (`"0.25"`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Fraction(i64);

impl Fraction {
    pub const ZERO: Fraction = Fraction(0);
    pub const ONE: Fraction = Fraction(PPB);

    pub const fn from_ppb(ppb: i64) -> Self {
        Fraction(ppb)
    }

    pub const fn ppb(self) -> i64 {
        self.0
    }

    /// `numerator / 10^decimals`, e.g. `Fraction::decimal(25, 2)` is 0.25.
    pub fn decimal(numerator: i64, decimals: u32) -> Self {
        assert!(decimals <= 9, "at most nine decimals");
        Fraction(numerator * 10i64.pow(9 - decimals))
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / PPB as f64
    }

    pub fn to_rational(self) -> BigRational {
        BigRational::new(BigInt::from(self.0), BigInt::from(PPB))
    }

    pub fn is_unit_interval(self) -> bool {
        (0..=PPB).contains(&self.0)
    }

    /// `1 - self`.
    pub fn complement(self) -> Fraction {
        Fraction(PPB - self.0)
    }

    /// `round_half_up(self × amount)`.
    pub fn of(self, amount: Money) -> Money {
        amount.mul_div_round(i128::from(self.0), i128::from(PPB))
    }

    /// `round_half_up((1 + self) × amount)`.
    pub fn one_plus_of(self, amount: Money) -> Money {
        amount.mul_div_round(i128::from(PPB + self.0), i128::from(PPB))
    }

    /// `round_half_up((1 - self) × amount)`.
    pub fn one_minus_of(self, amount: Money) -> Money {
        amount.mul_div_round(i128::from(PPB - self.0), i128::from(PPB))
    }

    /// Linear interpolation `a + (b - a) × num / den`, rounded half-up to ppb.
    pub fn lerp(a: Fraction, b: Fraction, num: i64, den: i64) -> Fraction {
        let delta = div_round_half_up(i128::from(b.0 - a.0) * i128::from(num), i128::from(den));
        Fraction(a.0 + delta as i64)
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let int = abs / PPB as u64;
        let frac = abs % PPB as u64;
        if frac == 0 {
            return write!(f, "{sign}{int}");
        }
        let digits = format!("{frac:09}");
        write!(f, "{sign}{int}.{}", digits.trim_end_matches('0'))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid decimal fraction {0:?}")]
pub struct ParseFractionError(pub String);

impl FromStr for Fraction {
    type Err = ParseFractionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseFractionError(s.to_string());
        let t = s.trim();
        let (negative, body) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
            return Err(err());
        }
        if frac_part.len() > 9 {
            return Err(err());
        }
        let int: i64 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| err())? };
        let frac: i64 = if frac_part.is_empty() {
            0
        } else {
            frac_part.parse::<i64>().map_err(|_| err())? * 10i64.pow(9 - frac_part.len() as u32)
        };
        let ppb = int.checked_mul(PPB).and_then(|v| v.checked_add(frac)).ok_or_else(err)?;
        Ok(Fraction(if negative { -ppb } else { ppb }))
    }
}

impl Serialize for Fraction {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Exact rational from an `f64` (every finite float is a dyadic rational).
pub fn rational_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn rational_int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

pub fn rational_zero() -> BigRational {
    BigRational::zero()
}

pub fn rational_one() -> BigRational {
    BigRational::one()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn half_up_rounding() {
        assert_eq!(div_round_half_up(5, 2), 3);
        assert_eq!(div_round_half_up(4, 2), 2);
        assert_eq!(div_round_half_up(7, 3), 2);
        assert_eq!(div_round_half_up(-5, 2), -2);
        assert_eq!(div_round_half_up(0, 7), 0);
    }

    #[test]
    fn fraction_parse_and_display() {
        let f: Fraction = "0.20".parse().unwrap();
        assert_eq!(f, Fraction::decimal(2, 1));
        assert_eq!(f.to_string(), "0.2");
        assert_eq!("1".parse::<Fraction>().unwrap(), Fraction::ONE);
        assert_eq!(".5".parse::<Fraction>().unwrap().ppb(), 500_000_000);
        assert_eq!("-0.25".parse::<Fraction>().unwrap().ppb(), -250_000_000);
        assert!("0.1234567891".parse::<Fraction>().is_err());
        assert!("abc".parse::<Fraction>().is_err());
        assert!("".parse::<Fraction>().is_err());
        assert!("1e3".parse::<Fraction>().is_err());
    }

    #[test]
    fn markup_rounding_is_half_up() {
        let m = Fraction::decimal(2, 1);
        assert_eq!(m.one_plus_of(Money(1_000_000)), Money(1_200_000));
        // 1.25 × 3 = 3.75 → 4
        assert_eq!(Fraction::decimal(25, 2).one_plus_of(Money(3)), Money(4));
        // 1.5 × 1 = 1.5 → 2
        assert_eq!(Fraction::decimal(5, 1).one_plus_of(Money(1)), Money(2));
    }

    #[test]
    fn rational_formatting() {
        let r = BigRational::new(BigInt::from(1), BigInt::from(3));
        assert_eq!(format_rational(&r, 6), "0.333333");
        let r = BigRational::new(BigInt::from(2), BigInt::from(3));
        assert_eq!(format_rational(&r, 3), "0.667");
        assert_eq!(format_rational(&rational_int(90), 0), "90");
        assert_eq!(format_rational(&rational_int(90), 2), "90.00");
    }

    proptest! {
        #[test]
        fn fraction_string_round_trip(ppb in -5_000_000_000i64..5_000_000_000i64) {
            let f = Fraction::from_ppb(ppb);
            prop_assert_eq!(f.to_string().parse::<Fraction>().unwrap(), f);
        }

        #[test]
        fn rounding_matches_rational(num in -1_000_000i64..1_000_000, den in 1i64..10_000) {
            let r = BigRational::new(BigInt::from(num), BigInt::from(den));
            prop_assert_eq!(round_half_up(&r), BigInt::from(div_round_half_up(num.into(), den.into())));
        }
    }
}
