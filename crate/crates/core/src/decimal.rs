//! Fixed-point currency arithmetic.
//!
//! Prices and money are `i64` counts of 10^-6 currency units. P&L accounting never
//! touches binary floating point, so replays are bit-reproducible and ledger
//! identities hold to exact equality.

use std::fmt;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Fractional resolution: 10^-6 currency units.
pub const SCALE: i64 = 1_000_000;
const FRAC_DIGITS: u32 = 6;

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum DecimalError {
    #[error("not a decimal number: {0:?}")]
    Malformed(String),
    #[error("too many fractional digits (max {FRAC_DIGITS}): {0:?}")]
    TooPrecise(String),
    #[error("decimal out of range: {0:?}")]
    Overflow(String),
}

/// A quoted price in fixed-point currency units. Differences may be negative.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub struct Price(i64);

/// A signed currency amount in fixed-point units.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub struct Money(i64);

fn parse_fixed(s: &str) -> Result<i64, DecimalError> {
    let t = s.trim();
    if t.is_empty() {
        return Err(DecimalError::Malformed(s.to_string()));
    }
    let (neg, t) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int_part, frac_part) = match t.split_once('.') {
        Some((a, b)) => (a, b),
        None => (t, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(DecimalError::Malformed(s.to_string()));
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(DecimalError::Malformed(s.to_string()));
    }
    if frac_part.len() as u32 > FRAC_DIGITS {
        return Err(DecimalError::TooPrecise(s.to_string()));
    }
    let int_val: i64 = if int_part.is_empty() {
        0
    } else {
        int_part
            .parse()
            .map_err(|_| DecimalError::Overflow(s.to_string()))?
    };
    let mut frac_val: i64 = if frac_part.is_empty() {
        0
    } else {
        frac_part
            .parse()
            .map_err(|_| DecimalError::Overflow(s.to_string()))?
    };
    frac_val *= 10i64.pow(FRAC_DIGITS - frac_part.len() as u32);
    let raw = int_val
        .checked_mul(SCALE)
        .and_then(|v| v.checked_add(frac_val))
        .ok_or_else(|| DecimalError::Overflow(s.to_string()))?;
    Ok(if neg { -raw } else { raw })
}

fn fmt_fixed(raw: i64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let sign = if raw < 0 { "-" } else { "" };
    let abs = raw.unsigned_abs();
    let int = abs / SCALE as u64;
    let mut frac = abs % SCALE as u64;
    if frac == 0 {
        return write!(f, "{sign}{int}");
    }
    let mut digits = FRAC_DIGITS;
    while frac % 10 == 0 {
        frac /= 10;
        digits -= 1;
    }
    write!(f, "{sign}{int}.{frac:0width$}", width = digits as usize)
}

impl Price {
    pub const ZERO: Price = Price(0);

    pub fn from_raw(raw: i64) -> Price {
        Price(raw)
    }

    pub fn from_units(units: i64) -> Price {
        Price(units * SCALE)
    }

    pub fn parse(s: &str) -> Result<Price, DecimalError> {
        parse_fixed(s).map(Price)
    }

    pub fn raw(self) -> i64 {
        self.0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE as f64
    }

    /// price x share count -> currency amount (exact).
    pub fn amount(self, shares: u64) -> Money {
        Money::from_i128(self.0 as i128 * shares as i128)
    }

    /// Nearest multiple of `tick` (half away from zero).
    pub fn round_to_tick(self, tick: Price) -> Price {
        let t = tick.0;
        if t <= 0 {
            return self;
        }
        let r = self.0 as i128;
        let t = t as i128;
        let q = if r >= 0 { (2 * r + t) / (2 * t) } else { -((-2 * r + t) / (2 * t)) };
        Price((q * t) as i64)
    }
}

impl Money {
    pub const ZERO: Money = Money(0);

    pub fn from_raw(raw: i64) -> Money {
        Money(raw)
    }

    pub fn from_units(units: i64) -> Money {
        Money(units * SCALE)
    }

    pub fn parse(s: &str) -> Result<Money, DecimalError> {
        parse_fixed(s).map(Money)
    }

    fn from_i128(v: i128) -> Money {
        debug_assert!(v >= i64::MIN as i128 && v <= i64::MAX as i128, "money overflow");
        Money(v as i64)
    }

    pub fn raw(self) -> i64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE as f64
    }

    /// Fractional rate applied to an amount, rounded half away from zero.
    /// Used for commissions; deterministic for a given rate.
    pub fn mul_rate(self, rate: f64) -> Money {
        let v = self.0 as f64 * rate;
        Money(if v >= 0.0 { (v + 0.5).floor() as i64 } else { (v - 0.5).ceil() as i64 })
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }
}

impl Add for Price {
    type Output = Price;
    fn add(self, rhs: Price) -> Price {
        Price(self.0 + rhs.0)
    }
}
impl Sub for Price {
    type Output = Price;
    fn sub(self, rhs: Price) -> Price {
        Price(self.0 - rhs.0)
    }
}
impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0.checked_add(rhs.0).expect("money overflow"))
    }
}
impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0.checked_sub(rhs.0).expect("money overflow"))
    }
}
impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}
impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        *self = *self + rhs;
    }
}
impl SubAssign for Money {
    fn sub_assign(&mut self, rhs: Money) {
        *self = *self - rhs;
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_fixed(self.0, f)
    }
}
impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_fixed(self.0, f)
    }
}
