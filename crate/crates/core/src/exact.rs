//! Exact rational helpers shared by the estimators and the enumeration oracle.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

/// `1 / 2^exp`.
pub fn inv_pow2(exp: u32) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << exp as usize)
}

pub fn to_f64(value: &Rational) -> f64 {
    // BigRational::to_f64 handles huge numerators/denominators without overflow.
    value.to_f64().unwrap_or_else(|| {
        let n = value.numer().to_f64().unwrap_or(f64::NAN);
        let d = value.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

pub fn is_zero(value: &Rational) -> bool {
    value.is_zero()
}

pub fn is_negative(value: &Rational) -> bool {
    value.is_negative()
}

/// Parses a plain decimal literal such as `0.25`, `-1.5e-2` or `3/8` exactly.
pub fn parse_decimal(text: &str) -> Result<Rational> {
    let s = text.trim();
    let bad = || Error::input(format!("not an exact decimal number: {text:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (whole, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !whole.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all: BigInt = format!("{whole}{frac}").parse().map_err(|_| bad())?;
    let scale = exponent - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut value = Rational::from_integer(all);
    if scale >= 0 {
        value *= Rational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= Rational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if negative { -value } else { value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimals_parse_exactly() {
        assert_eq!(parse_decimal("0.25").unwrap(), ratio(1, 4));
        assert_eq!(parse_decimal("-1.5e-2").unwrap(), ratio(-3, 200));
        assert_eq!(parse_decimal("5/12").unwrap(), ratio(5, 12));
        assert_eq!(parse_decimal("3").unwrap(), int(3));
        assert_eq!(parse_decimal(".5").unwrap(), ratio(1, 2));
        assert!(parse_decimal("abc").is_err());
        assert!(parse_decimal("1/0").is_err());
        assert!(parse_decimal("").is_err());
    }

    #[test]
    fn inverse_powers_of_two() {
        assert_eq!(inv_pow2(0), int(1));
        assert_eq!(inv_pow2(3), ratio(1, 8));
        assert_eq!(to_f64(&ratio(3, 16)), 0.1875);
    }
}
