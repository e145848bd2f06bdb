//! Exact currency arithmetic in integer cents.
//!
//! All ledger-facing amounts are held as signed integer cents so that sums,
//! splits, and table totals reproduce to the cent. Discounting and IRR work
//! on float values derived from these cents (see [`crate::numeric`]).

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

use crate::error::{ModelError, Result};

/// A signed USD amount stored as integer cents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Money(i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn from_cents(cents: i64) -> Money {
        Money(cents)
    }

    pub const fn from_dollars(dollars: i64) -> Money {
        Money(dollars * 100)
    }

    pub const fn cents(self) -> i64 {
        self.0
    }

    pub fn as_dollars_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }

    pub const fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub const fn abs(self) -> Money {
        Money(self.0.abs())
    }

    pub fn max(self, other: Money) -> Money {
        Money(self.0.max(other.0))
    }

    /// Convert a dollar figure to cents, rejecting sub-cent precision.
    pub fn try_from_dollars_f64(dollars: f64) -> Result<Money> {
        if !dollars.is_finite() {
            return Err(ModelError::validation(
                "amount",
                format!("not a finite dollar amount: {dollars}"),
            ));
        }
        let cents = dollars * 100.0;
        let rounded = cents.round();
        if (cents - rounded).abs() > 1e-6 {
            return Err(ModelError::validation(
                "amount",
                format!("{dollars} has sub-cent precision"),
            ));
        }
        if rounded.abs() > i64::MAX as f64 / 2.0 {
            return Err(ModelError::validation(
                "amount",
                format!("{dollars} is out of range"),
            ));
        }
        Ok(Money(rounded as i64))
    }

    /// Multiply by a unit count, erroring on overflow.
    pub fn checked_mul(self, n: i64) -> Result<Money> {
        self.0
            .checked_mul(n)
            .map(Money)
            .ok_or_else(|| ModelError::validation("amount", "currency overflow"))
    }

    /// Scale by a factor, rounding to the nearest cent.
    pub fn scale_rounded(self, factor: f64) -> Money {
        Money((self.0 as f64 * factor).round() as i64)
    }

    /// Take a fractional share, rounding the cent count down.
    pub fn fraction_floor(self, fraction: f64) -> Money {
        Money((self.0 as f64 * fraction).floor() as i64)
    }

    /// Decimal string with two fraction digits, e.g. `-500000.00` (CSV form).
    pub fn to_decimal_string(self) -> String {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        format!("{sign}{}.{:02}", abs / 100, abs % 100)
    }
}

fn group_thousands(mut n: u64) -> String {
    let mut parts = Vec::new();
    while n >= 1000 {
        parts.push(format!("{:03}", n % 1000));
        n /= 1000;
    }
    let mut out = n.to_string();
    for part in parts.iter().rev() {
        out.push(',');
        out.push_str(part);
    }
    out
}

impl fmt::Display for Money {
    /// Renders `$1,234` when the cent part is zero, `$1,234.56` otherwise.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let dollars = group_thousands(abs / 100);
        if abs % 100 == 0 {
            write!(f, "{sign}${dollars}")
        } else {
            write!(f, "{sign}${dollars}.{:02}", abs % 100)
        }
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
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
        self.0 += rhs.0;
    }
}

impl SubAssign for Money {
    fn sub_assign(&mut self, rhs: Money) {
        self.0 -= rhs.0;
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        Money(iter.map(|m| m.0).sum())
    }
}
