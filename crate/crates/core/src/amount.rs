//! Signed 64-bit fixed-point decimal with twelve fractional digits.
//!
//! Every balance, fee, ratio and score in the crate is an [`Amount`]. Products
//! and quotients are computed exactly in `i128` and rounded once, half away
//! from zero, so results are identical on every platform.

use std::fmt;
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Number of fractional decimal digits.
pub const DECIMALS: u32 = 12;
/// Raw units per whole unit.
pub const SCALE: i64 = 1_000_000_000_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Amount(i64);

impl Amount {
    pub const ZERO: Amount = Amount(0);
    pub const ONE: Amount = Amount(SCALE);
    /// Smallest positive value.
    pub const ULP: Amount = Amount(1);
    pub const MAX: Amount = Amount(i64::MAX);

    pub const fn from_raw(raw: i64) -> Self {
        Amount(raw)
    }

    pub const fn raw(self) -> i64 {
        self.0
    }

    pub fn from_int(units: i64) -> Result<Self> {
        units.checked_mul(SCALE).map(Amount).ok_or(Error::Overflow)
    }

    /// `num / den` rounded to the nearest representable value.
    pub fn from_ratio(num: i128, den: i128) -> Result<Self> {
        if den == 0 {
            return Err(Error::DivisionByZero);
        }
        narrow(div_round(num * SCALE as i128, den))
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn abs(self) -> Self {
        Amount(self.0.abs())
    }

    pub fn checked_add(self, rhs: Amount) -> Result<Self> {
        self.0.checked_add(rhs.0).map(Amount).ok_or(Error::Overflow)
    }

    pub fn checked_sub(self, rhs: Amount) -> Result<Self> {
        self.0.checked_sub(rhs.0).map(Amount).ok_or(Error::Overflow)
    }

    pub fn checked_mul(self, rhs: Amount) -> Result<Self> {
        narrow(div_round(self.0 as i128 * rhs.0 as i128, SCALE as i128))
    }

    pub fn checked_div(self, rhs: Amount) -> Result<Self> {
        if rhs.0 == 0 {
            return Err(Error::DivisionByZero);
        }
        narrow(div_round(self.0 as i128 * SCALE as i128, rhs.0 as i128))
    }

    /// `self * mul / div` with a single rounding step.
    pub fn checked_mul_div(self, mul: Amount, div: Amount) -> Result<Self> {
        if div.0 == 0 {
            return Err(Error::DivisionByZero);
        }
        narrow(div_round(self.0 as i128 * mul.0 as i128, div.0 as i128))
    }

    /// Integer multiple, exact.
    pub fn checked_scale(self, factor: i64) -> Result<Self> {
        self.0
            .checked_mul(factor)
            .map(Amount)
            .ok_or(Error::Overflow)
    }

    /// Largest integer not above `self`, as a plain integer.
    pub fn floor_int(self) -> i64 {
        self.0.div_euclid(SCALE)
    }

    /// Rounds to `decimals` fractional digits (half away from zero).
    pub fn round_dp(self, decimals: u32) -> Self {
        if decimals >= DECIMALS {
            return self;
        }
        let step = 10i128.pow(DECIMALS - decimals);
        Amount((div_round(self.0 as i128, step) * step) as i64)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE as f64
    }
}

/// Rounded integer division, ties away from zero.
pub(crate) fn div_round(num: i128, den: i128) -> i128 {
    debug_assert!(den != 0);
    let q = num / den;
    let r = num % den;
    if r == 0 {
        return q;
    }
    let twice = r.unsigned_abs() * 2;
    if twice >= den.unsigned_abs() {
        if (num < 0) == (den < 0) {
            q + 1
        } else {
            q - 1
        }
    } else {
        q
    }
}

pub(crate) fn narrow(raw: i128) -> Result<Amount> {
    i64::try_from(raw).map(Amount).map_err(|_| Error::Overflow)
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let neg = self.0 < 0;
        let abs = self.0.unsigned_abs();
        let int = abs / SCALE as u64;
        let frac = abs % SCALE as u64;
        if neg {
            f.write_str("-")?;
        }
        if frac == 0 {
            write!(f, "{int}")
        } else {
            let digits = format!("{frac:012}");
            write!(f, "{int}.{}", digits.trim_end_matches('0'))
        }
    }
}

impl FromStr for Amount {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("invalid decimal `{s}`"));
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(bad());
        }
        let frac_trimmed = frac_part.trim_end_matches('0');
        if frac_trimmed.len() > DECIMALS as usize {
            return Err(Error::Parse(format!(
                "`{s}` has more than {DECIMALS} fractional digits"
            )));
        }
        let int: i128 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| Error::Overflow)?
        };
        let mut frac: i128 = 0;
        for b in frac_trimmed.bytes() {
            frac = frac * 10 + (b - b'0') as i128;
        }
        frac *= 10i128.pow(DECIMALS - frac_trimmed.len() as u32);
        let raw = int
            .checked_mul(SCALE as i128)
            .and_then(|v| v.checked_add(frac))
            .ok_or(Error::Overflow)?;
        narrow(if neg { -raw } else { raw })
    }
}

impl Serialize for Amount {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

struct AmountVisitor;

impl<'de> Visitor<'de> for AmountVisitor {
    type Value = Amount;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a decimal string or number")
    }

    fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Amount, E> {
        v.parse().map_err(E::custom)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Amount, E> {
        Amount::from_int(v).map_err(E::custom)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Amount, E> {
        let v = i64::try_from(v).map_err(E::custom)?;
        Amount::from_int(v).map_err(E::custom)
    }

    // Shortest round-trip formatting recovers the literal that was written.
    fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Amount, E> {
        if !v.is_finite() {
            return Err(E::custom("non-finite number"));
        }
        format!("{v}").parse().map_err(E::custom)
    }
}

impl<'de> Deserialize<'de> for Amount {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Amount, D::Error> {
        deserializer.deserialize_any(AmountVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(s: &str) -> Amount {
        s.parse().unwrap()
    }

    #[test]
    fn parse_and_display() {
        assert_eq!(a("7.13").raw(), 7_130_000_000_000);
        assert_eq!(a("7.13").to_string(), "7.13");
        assert_eq!(a("10").to_string(), "10");
        assert_eq!(a("10.000").to_string(), "10");
        assert_eq!(a("-0.5").to_string(), "-0.5");
        assert_eq!(a(".25").to_string(), "0.25");
        assert_eq!(a("0.000000000001"), Amount::ULP);
        assert!("0.0000000000001".parse::<Amount>().is_err());
        assert!("1e3".parse::<Amount>().is_err());
        assert!("".parse::<Amount>().is_err());
        assert!(".".parse::<Amount>().is_err());
        assert!("99999999999".parse::<Amount>().is_err());
    }

    #[test]
    fn rounding_half_away_from_zero() {
        assert_eq!(div_round(5, 2), 3);
        assert_eq!(div_round(-5, 2), -3);
        assert_eq!(div_round(4, 3), 1);
        assert_eq!(div_round(-4, 3), -1);
        assert_eq!(div_round(7, -2), -4);
        assert_eq!(
            Amount::from_ratio(1, 3).unwrap().to_string(),
            "0.333333333333"
        );
        assert_eq!(
            Amount::from_ratio(2, 3).unwrap().to_string(),
            "0.666666666667"
        );
    }

    #[test]
    fn arithmetic() {
        assert_eq!(a("2.5").checked_mul(a("4")).unwrap(), a("10"));
        assert_eq!(a("1.4").checked_div(a("2")).unwrap(), a("0.7"));
        assert_eq!(
            a("10").checked_mul_div(a("0.25"), a("0.5")).unwrap(),
            a("5")
        );
        assert!(Amount::MAX.checked_add(Amount::ULP).is_err());
        assert!(a("9000000").checked_mul(a("9000000")).is_err());
        assert!(a("1").checked_div(Amount::ZERO).is_err());
        assert_eq!(a("2.5").floor_int(), 2);
        assert_eq!(a("0.125").round_dp(2), a("0.13"));
    }

    #[test]
    fn serde_accepts_strings_and_numbers() {
        let v: Vec<Amount> = serde_json::from_str(r#"["0.1", 3, 0.01, 1.5]"#).unwrap();
        assert_eq!(v, vec![a("0.1"), a("3"), a("0.01"), a("1.5")]);
        assert_eq!(serde_json::to_string(&a("6.6")).unwrap(), "\"6.6\"");
    }
}
