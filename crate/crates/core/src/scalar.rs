//! Numeric abstraction shared by the game, equilibrium and metrics code.
//!
//! Everything that only needs field arithmetic and comparisons (hardmax
//! allocation, utilities, deviation advantages, coverage, equilibrium search)
//! is generic over [`Scalar`]. This lets the same code run on `f64` for speed
//! and on exact rationals when a fixture must be checked to the last digit.
//! Softmax needs an exponential, which rationals do not have; it is available
//! only through [`Scalar::exp`] returning `Some`.

use std::fmt;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

pub trait Scalar:
    Clone
    + PartialOrd
    + Num
    + Signed
    + FromPrimitive
    + ToPrimitive
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Slack absorbed by every weak comparison between computed utilities.
    /// Zero for exact types.
    fn tolerance() -> Self;

    /// `e^self`, or `None` when the type cannot represent it.
    fn exp(&self) -> Option<Self>;

    /// Parses a plain decimal literal (`-0.25`, `3`, `1.5e-3`).
    ///
    /// Exact types get the exact value of the literal; floats get the
    /// nearest representable value.
    fn from_decimal(text: &str) -> Option<Self> {
        parse_decimal(text)
    }

    /// Converts an `f64` through its shortest round-trip decimal form, so
    /// `0.2_f64` becomes exactly `1/5` for rationals.
    fn from_f64_decimal(value: f64) -> Option<Self> {
        if !value.is_finite() {
            return None;
        }
        Self::from_decimal(&format!("{value}"))
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_usize_exact(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar")
    }
}

fn parse_decimal<S: Scalar>(text: &str) -> Option<S> {
    let text = text.trim();
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(at) => (&body[..at], body[at + 1..].parse::<i32>().ok()?),
        None => (body, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let ten = S::from_u8(10)?;
    let mut value = S::zero();
    for c in int_part.chars().chain(frac_part.chars()) {
        value = value * ten.clone() + S::from_u32(c.to_digit(10)?)?;
    }
    let scale = exponent - i32::try_from(frac_part.len()).ok()?;
    let power = num_traits::pow(ten, scale.unsigned_abs() as usize);
    if scale < 0 {
        value = value / power;
    } else {
        value = value * power;
    }
    Some(if negative { -value } else { value })
}

impl Scalar for f64 {
    fn tolerance() -> Self {
        1e-12
    }

    fn exp(&self) -> Option<Self> {
        Some(f64::exp(*self))
    }

    fn from_decimal(text: &str) -> Option<Self> {
        text.trim().parse().ok()
    }

    fn from_f64_decimal(value: f64) -> Option<Self> {
        value.is_finite().then_some(value)
    }
}

impl Scalar for f32 {
    fn tolerance() -> Self {
        1e-5
    }

    fn exp(&self) -> Option<Self> {
        Some(f32::exp(*self))
    }

    fn from_decimal(text: &str) -> Option<Self> {
        text.trim().parse().ok()
    }

    fn from_f64_decimal(value: f64) -> Option<Self> {
        value.is_finite().then_some(value as f32)
    }
}

impl Scalar for Ratio<i64> {
    fn tolerance() -> Self {
        Self::from_integer(0)
    }

    fn exp(&self) -> Option<Self> {
        None
    }
}

impl Scalar for BigRational {
    fn tolerance() -> Self {
        Self::from_integer(BigInt::from(0))
    }

    fn exp(&self) -> Option<Self> {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parsing_is_exact_for_rationals() {
        let x: BigRational = Scalar::from_decimal("0.2").unwrap();
        assert_eq!(x, BigRational::new(1.into(), 5.into()));
        let y: Ratio<i64> = Scalar::from_decimal("-1.25e-2").unwrap();
        assert_eq!(y, Ratio::new(-1, 80));
        let z: Ratio<i64> = Scalar::from_decimal("3").unwrap();
        assert_eq!(z, Ratio::from_integer(3));
    }

    #[test]
    fn shortest_decimal_round_trip() {
        let x: BigRational = Scalar::from_f64_decimal(0.030658748).unwrap();
        assert_eq!(
            x,
            BigRational::new(30658748.into(), 1_000_000_000.into())
        );
        let y: f64 = Scalar::from_f64_decimal(0.1 + 0.2).unwrap();
        assert_eq!(y, 0.1 + 0.2);
    }

    #[test]
    fn rejects_garbage() {
        assert!(<f64 as Scalar>::from_decimal("abc").is_none());
        assert!(<Ratio<i64> as Scalar>::from_decimal("1.2.3").is_none());
        assert!(<Ratio<i64> as Scalar>::from_decimal(".").is_none());
        assert!(<BigRational as Scalar>::from_f64_decimal(f64::NAN).is_none());
    }

    #[test]
    fn exact_types_have_no_exponential() {
        assert!(Ratio::<i64>::from_integer(1).exp().is_none());
        assert_eq!(Scalar::exp(&0.0_f64), Some(1.0));
    }
}
