//! Exact rational arithmetic helpers.
//!
//! All market data (quantities, prices, money) is carried as arbitrary-precision
//! rationals so golden-table comparisons are exact. Floating point appears only
//! in the oracle module and in display rounding.

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::str::FromStr;

pub type Rat = BigRational;

/// Integer-valued rational.
pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// n/d as a rational. Panics on d = 0.
pub fn ratio(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn is_zero(x: &Rat) -> bool {
    x.is_zero()
}

pub fn to_f64(x: &Rat) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Parse a decimal literal ("30.125", "-7.8", "200") or an explicit
/// fraction ("1/3") into an exact rational.
pub fn parse_decimal(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty numeric literal".into());
    }
    if let Some((n, d)) = s.split_once('/') {
        let num = BigInt::from_str(n.trim()).map_err(|e| format!("bad numerator {n:?}: {e}"))?;
        let den = BigInt::from_str(d.trim()).map_err(|e| format!("bad denominator {d:?}: {e}"))?;
        if den.is_zero() {
            return Err(format!("zero denominator in {s:?}"));
        }
        return Ok(Rat::new(num, den));
    }
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1i64, rest),
        None => (1, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(format!("bad numeric literal {s:?}"));
    }
    let digits: String = format!("{int_part}{frac_part}");
    if !digits.chars().all(|c| c.is_ascii_digit()) {
        return Err(format!("bad numeric literal {s:?}"));
    }
    let num = BigInt::from_str(&digits).map_err(|e| format!("bad literal {s:?}: {e}"))?;
    let den = BigInt::from(10u8).pow(frac_part.len() as u32);
    Ok(Rat::new(BigInt::from(sign) * num, den))
}

/// Render exactly: terminating decimal when the denominator is 2^a·5^b,
/// otherwise "p/q". Round-trips through `parse_decimal`.
pub fn format_exact(x: &Rat) -> String {
    let den = x.denom().clone();
    let mut d = den.clone();
    let mut twos = 0u32;
    let mut fives = 0u32;
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while (&d % &two).is_zero() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    if !d.is_one() {
        return format!("{}/{}", x.numer(), x.denom());
    }
    let places = twos.max(fives);
    let scale = BigInt::from(10u8).pow(places);
    let scaled = x.numer() * &scale / &den;
    let neg = scaled.sign() == Sign::Minus;
    let abs = scaled.magnitude().to_string();
    let mut digits = abs;
    if places == 0 {
        return format!("{}{}", if neg { "-" } else { "" }, digits);
    }
    while digits.len() <= places as usize {
        digits.insert(0, '0');
    }
    let split = digits.len() - places as usize;
    let (i, f) = digits.split_at(split);
    format!("{}{}.{}", if neg { "-" } else { "" }, i, f)
}

/// Round to a whole number of cents, halves away from zero. This is the
/// settlement rounding applied to published prices.
pub fn round_cents_half_up(x: &Rat) -> Rat {
    let scaled = x * rat(100);
    let floor = scaled.floor();
    let frac = &scaled - &floor;
    let half = ratio(1, 2);
    let cents = if x.is_negative() {
        // mirror: exact halves keep the floor, which is away from zero here
        if frac > half {
            floor + Rat::one()
        } else {
            floor
        }
    } else if frac >= half {
        floor + Rat::one()
    } else {
        floor
    };
    cents / rat(100)
}

/// Two-decimal display with banker's rounding (display only; payloads stay exact).
pub fn display_money(x: &Rat) -> String {
    let scaled = x * rat(100);
    let floor = scaled.floor();
    let frac = &scaled - &floor;
    let half = ratio(1, 2);
    let mut cents = if frac > half {
        floor + Rat::one()
    } else if frac < half {
        floor
    } else {
        // tie: to even
        let f = floor.to_integer();
        if (&f % 2i32).is_zero() {
            floor
        } else {
            floor + Rat::one()
        }
    }
    .to_integer();
    let neg = cents.sign() == Sign::Minus;
    if neg {
        cents = -cents;
    }
    let whole = &cents / 100i32;
    let rem = &cents % 100i32;
    format!("{}{}.{:02}", if neg { "-" } else { "" }, whole, rem)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_round_trip() {
        for s in ["0", "200", "-7.8", "30.125", "0.01", "1/3", "-5/7"] {
            let x = parse_decimal(s).unwrap();
            let y = parse_decimal(&format_exact(&x)).unwrap();
            assert_eq!(x, y, "round trip failed for {s}");
        }
        assert_eq!(parse_decimal("30.125").unwrap(), ratio(241, 8));
        assert!(parse_decimal("").is_err());
        assert!(parse_decimal("1.2.3").is_err());
        assert!(parse_decimal("1/0").is_err());
    }

    #[test]
    fn settlement_rounding_half_away_from_zero() {
        assert_eq!(round_cents_half_up(&ratio(241, 8)), ratio(3013, 100)); // 30.125 -> 30.13
        assert_eq!(round_cents_half_up(&ratio(963, 32)), ratio(3009, 100)); // 30.09375 -> 30.09
        assert_eq!(round_cents_half_up(&ratio(371, 8)), ratio(4638, 100)); // 46.375 -> 46.38
        assert_eq!(round_cents_half_up(&rat(10)), rat(10));
        assert_eq!(round_cents_half_up(&ratio(-241, 8)), ratio(-3013, 100));
    }

    #[test]
    fn display_uses_bankers_rounding() {
        assert_eq!(display_money(&ratio(241, 8)), "30.12"); // display tie -> even
        assert_eq!(display_money(&ratio(-78, 10)), "-7.80");
        assert_eq!(display_money(&ratio(4114, 10)), "411.40");
        assert_eq!(display_money(&ratio(1660, 3)), "553.33");
    }

    #[test]
    fn format_nonterminating_as_fraction() {
        assert_eq!(format_exact(&ratio(1, 3)), "1/3");
        assert_eq!(format_exact(&ratio(241, 8)), "30.125");
        assert_eq!(format_exact(&rat(-5)), "-5");
    }
}
