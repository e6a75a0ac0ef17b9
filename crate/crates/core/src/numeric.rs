//! Exact-rational helpers, compensated summation, and the small integer
//! schedules (sample counts, repetition counts) shared by the schemes.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Relative guard band used when ratios can only be scored in floating point.
pub const FLOAT_GUARD: f64 = 1e-12;

/// Parses `"p/q"`, integers, decimals and scientific notation losslessly.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let s = text.trim();
    let bad = || Error::input(format!("not a rational number: {text:?}"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: BigInt = num.trim().parse().map_err(|_| bad())?;
        let den: BigInt = den.trim().parse().map_err(|_| bad())?;
        if den.is_zero() {
            return Err(Error::input(format!("zero denominator in {text:?}")));
        }
        return Ok(Rational::new(num, den));
    }

    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let exp: i64 = s[pos + 1..].parse().map_err(|_| bad())?;
            (&s[..pos], exp)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all: String = format!("{int_part}{frac_part}");
    let mut value = Rational::from_integer(all.parse::<BigInt>().map_err(|_| bad())?);
    let scale = exponent - frac_part.len() as i64;
    let ten = Rational::from_integer(BigInt::from(10));
    if scale >= 0 {
        value *= pow(&ten, scale as u32);
    } else {
        value /= pow(&ten, (-scale) as u32);
    }
    if negative {
        value = -value;
    }
    Ok(value)
}

fn pow(base: &Rational, exp: u32) -> Rational {
    let mut acc = Rational::one();
    for _ in 0..exp {
        acc *= base;
    }
    acc
}

/// Renders a rational as an integer when possible, else as `"p/q"`.
pub fn format_rational(value: &Rational) -> String {
    if value.is_integer() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// Exact rational image of a finite double.
pub fn rational_from_f64(x: f64) -> Rational {
    Rational::from_float(x).expect("finite value")
}

pub fn rational_to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        if x.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Neumaier-compensated summation.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            carry += (sum - t) + x;
        } else {
            carry += (x - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// Where a ratio `numerator / denominator` falls relative to `[1-eps, 1/(1-eps)]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioCheck {
    Inside,
    Outside,
    /// Numerator is zero; the ratio is defined as 1 and flagged.
    Vacuous,
}

impl RatioCheck {
    pub fn is_outside(self) -> bool {
        self == RatioCheck::Outside
    }
}

/// Closed-interval membership in exact arithmetic. Endpoints count as inside.
pub fn ratio_check_exact(numerator: &Rational, denominator: &Rational, eps: &Rational) -> RatioCheck {
    if numerator.is_zero() {
        return RatioCheck::Vacuous;
    }
    if denominator.is_zero() {
        return RatioCheck::Outside;
    }
    let keep = Rational::one() - eps;
    let lower_ok = numerator >= &(&keep * denominator);
    let upper_ok = &keep * numerator <= *denominator;
    if lower_ok && upper_ok {
        RatioCheck::Inside
    } else {
        RatioCheck::Outside
    }
}

/// Exact check on doubles: every finite double is a rational.
pub fn ratio_check_f64_exact(numerator: f64, denominator: f64, eps: f64) -> RatioCheck {
    ratio_check_exact(
        &rational_from_f64(numerator),
        &rational_from_f64(denominator),
        &rational_from_f64(eps),
    )
}

/// Floating-point check that only reports `Outside` beyond a relative guard band.
pub fn ratio_check_guarded(numerator: f64, denominator: f64, eps: f64) -> RatioCheck {
    if numerator == 0.0 {
        return RatioCheck::Vacuous;
    }
    if denominator == 0.0 {
        return RatioCheck::Outside;
    }
    let keep = 1.0 - eps;
    let below = numerator < keep * denominator * (1.0 - FLOAT_GUARD);
    let above = keep * numerator > denominator * (1.0 + FLOAT_GUARD);
    if below || above {
        RatioCheck::Outside
    } else {
        RatioCheck::Inside
    }
}

pub(crate) fn check_unit_open(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::input(format!("{name} must lie in (0, 1), got {x}")))
    }
}

/// `ceil(ln(1/delta) / eps)`: draws needed so that `(1-eps)^k <= delta`.
pub fn certification_sample_count(eps: f64, delta: f64) -> Result<u64> {
    check_unit_open("epsilon", eps)?;
    check_unit_open("delta", delta)?;
    Ok(((1.0 / delta).ln() / eps).ceil().max(1.0) as u64)
}

/// Smallest `r >= 1` with `3^-r <= delta`, up to a 1e-12 relative tolerance so
/// exact powers of three map to their own exponent.
pub fn amplification_repetitions(delta: f64) -> Result<u32> {
    check_unit_open("delta", delta)?;
    let mut r = 1u32;
    let mut miss = 1.0 / 3.0;
    while miss > delta * (1.0 + 1e-12) {
        r += 1;
        miss /= 3.0;
    }
    Ok(r)
}

/// Smallest `c >= 1` with `2^-c <= delta`, i.e. `ceil(log2(1/delta))`.
pub fn walk_start(delta: f64) -> Result<u32> {
    check_unit_open("delta", delta)?;
    let mut c = 1u32;
    let mut miss = 0.5f64;
    while miss > delta {
        c += 1;
        miss /= 2.0;
    }
    Ok(c)
}
