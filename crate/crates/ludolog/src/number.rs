//! Exact rational arithmetic for payoff values.
//!
//! Payoff grading compares numbers for strict order, so the engine never
//! touches floating point: integer and decimal literals are stored as
//! reduced fractions and `+ - * /` stay exact. All operations are checked;
//! overflow surfaces as `None` and becomes a type error in the engine.

use std::cmp::Ordering;
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A rational number with `den > 0` and `gcd(|num|, den) == 1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Number {
    num: i64,
    den: i64,
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.abs()
}

impl Number {
    pub const ZERO: Number = Number { num: 0, den: 1 };

    pub fn integer(n: i64) -> Self {
        Number { num: n, den: 1 }
    }

    /// Builds a reduced fraction. `None` when the denominator is zero or the
    /// reduced parts do not fit in `i64`.
    pub fn new(num: i64, den: i64) -> Option<Self> {
        Self::from_i128(num as i128, den as i128)
    }

    fn from_i128(num: i128, den: i128) -> Option<Self> {
        if den == 0 {
            return None;
        }
        let sign = if den < 0 { -1 } else { 1 };
        let g = gcd(num, den);
        let (num, den) = if g == 0 {
            (0, 1)
        } else {
            (sign * num / g, den.abs() / g)
        };
        if num < i64::MIN as i128 || num > i64::MAX as i128 || den > i64::MAX as i128 {
            return None;
        }
        Some(Number {
            num: num as i64,
            den: den as i64,
        })
    }

    /// Parses an unsigned integer or decimal literal such as `35` or `12.5`.
    pub fn parse_literal(text: &str) -> Option<Self> {
        match text.split_once('.') {
            None => text.parse::<i64>().ok().map(Number::integer),
            Some((int_part, frac_part)) => {
                if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
                    return None;
                }
                let int_val: i128 = int_part.parse().ok()?;
                let frac_val: i128 = frac_part.parse().ok()?;
                let scale = 10i128.checked_pow(frac_part.len() as u32)?;
                Self::from_i128(int_val.checked_mul(scale)?.checked_add(frac_val)?, scale)
            }
        }
    }

    pub fn numerator(&self) -> i64 {
        self.num
    }

    pub fn denominator(&self) -> i64 {
        self.den
    }

    pub fn is_integer(&self) -> bool {
        self.den == 1
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn checked_add(self, rhs: Self) -> Option<Self> {
        Self::from_i128(
            self.num as i128 * rhs.den as i128 + rhs.num as i128 * self.den as i128,
            self.den as i128 * rhs.den as i128,
        )
    }

    pub fn checked_sub(self, rhs: Self) -> Option<Self> {
        Self::from_i128(
            self.num as i128 * rhs.den as i128 - rhs.num as i128 * self.den as i128,
            self.den as i128 * rhs.den as i128,
        )
    }

    pub fn checked_mul(self, rhs: Self) -> Option<Self> {
        Self::from_i128(
            self.num as i128 * rhs.num as i128,
            self.den as i128 * rhs.den as i128,
        )
    }

    /// Exact division; `None` on division by zero.
    pub fn checked_div(self, rhs: Self) -> Option<Self> {
        if rhs.num == 0 {
            return None;
        }
        Self::from_i128(
            self.num as i128 * rhs.den as i128,
            self.den as i128 * rhs.num as i128,
        )
    }

    pub fn checked_neg(self) -> Option<Self> {
        Self::from_i128(-(self.num as i128), self.den as i128)
    }
}

impl Ord for Number {
    fn cmp(&self, other: &Self) -> Ordering {
        let lhs = self.num as i128 * other.den as i128;
        let rhs = other.num as i128 * self.den as i128;
        lhs.cmp(&rhs)
    }
}

impl PartialOrd for Number {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Number {
    /// Integers print plainly, fractions with a power-of-ten denominator
    /// print as decimals (the forms a literal can produce), anything else
    /// falls back to `num/den`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            return write!(f, "{}", self.num);
        }
        if let Some(frac_digits) = decimal_scale(self.den) {
            let scale = 10i128.pow(frac_digits);
            let scaled = (self.num as i128 * scale / self.den as i128).abs();
            let sign = if self.num < 0 { "-" } else { "" };
            let int_part = scaled / scale;
            let frac_part = scaled % scale;
            return write!(
                f,
                "{sign}{int_part}.{frac_part:0width$}",
                width = frac_digits as usize
            );
        }
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl fmt::Debug for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Smallest `k` with `den | 10^k`, if the denominator is of the form 2^a·5^b.
fn decimal_scale(den: i64) -> Option<u32> {
    let mut d = den;
    let mut twos = 0u32;
    let mut fives = 0u32;
    while d % 2 == 0 {
        d /= 2;
        twos += 1;
    }
    while d % 5 == 0 {
        d /= 5;
        fives += 1;
    }
    (d == 1).then(|| twos.max(fives))
}

impl Serialize for Number {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Number {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        let (sign, digits) = match text.strip_prefix('-') {
            Some(rest) => (-1i64, rest),
            None => (1, text.as_str()),
        };
        let value = if let Some((n, d)) = digits.split_once('/') {
            let n: i64 = n.parse().map_err(D::Error::custom)?;
            let d: i64 = d.parse().map_err(D::Error::custom)?;
            Number::new(n, d)
        } else {
            Number::parse_literal(digits)
        };
        let value = value.ok_or_else(|| D::Error::custom(format!("invalid number: {text}")))?;
        value
            .checked_mul(Number::integer(sign))
            .ok_or_else(|| D::Error::custom("number out of range"))
    }
}
