//! Scalar abstraction shared by the generic kernel.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational, the default scalar everywhere.
pub type Q = BigRational;

/// Ordered field used by the kernel.
///
/// Implemented for [`BigRational`] (exact, unbounded), [`Rational64`]
/// (exact, may overflow) and `f64` (fast, inexact).
pub trait Scalar:
    num_traits::Num
    + Signed
    + Clone
    + PartialOrd
    + Debug
    + Display
    + FromPrimitive
    + ToPrimitive
    + Send
    + Sync
    + 'static
{
    fn ratio(n: i64, d: i64) -> Self;

    fn parse_scalar(s: &str) -> Result<Self>;

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }
}

impl Scalar for BigRational {
    fn ratio(n: i64, d: i64) -> Self {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn parse_scalar(s: &str) -> Result<Self> {
        parse_q(s)
    }
}

impl Scalar for Rational64 {
    fn ratio(n: i64, d: i64) -> Self {
        Rational64::new(n, d)
    }

    fn parse_scalar(s: &str) -> Result<Self> {
        let q = parse_q(s)?;
        let n = q.numer().to_i64();
        let d = q.denom().to_i64();
        match (n, d) {
            (Some(n), Some(d)) => Ok(Rational64::new(n, d)),
            _ => Err(Error::Parse(format!("{s}: does not fit in a 64-bit rational"))),
        }
    }
}

impl Scalar for f64 {
    fn ratio(n: i64, d: i64) -> Self {
        n as f64 / d as f64
    }

    fn parse_scalar(s: &str) -> Result<Self> {
        let q = parse_q(s)?;
        Ok(q.to_f64().unwrap_or(f64::NAN))
    }
}

/// `n/d` as an exact rational.
pub fn q(n: i64, d: i64) -> Q {
    Q::ratio(n, d)
}

/// Integer as an exact rational.
pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Parses `"p/q"`, an integer, or a finite decimal such as `"0.25"`.
pub fn parse_q(s: &str) -> Result<Q> {
    let t = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    if let Some((n, d)) = t.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator: {s:?}")));
        }
        return Ok(Q::new(n, d));
    }
    if let Some((ip, fp)) = t.split_once('.') {
        let neg = ip.starts_with('-');
        let digits = format!("{}{}", ip.trim_start_matches(['-', '+']), fp);
        if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let n = BigInt::from_str(&digits).map_err(|_| bad())?;
        let d = num_traits::pow(BigInt::from(10), fp.len());
        let v = Q::new(n, d);
        return Ok(if neg { -v } else { v });
    }
    BigInt::from_str(t).map(Q::from_integer).map_err(|_| bad())
}

/// Decimal rendering with `digits` fractional digits (truncated toward zero).
pub fn to_decimal(x: &Q, digits: usize) -> String {
    let scale = num_traits::pow(BigInt::from(10), digits);
    let scaled = (x * Q::from_integer(scale.clone())).trunc().to_integer();
    let neg = scaled.is_negative() || (scaled.is_zero() && x.is_negative());
    let a = scaled.abs();
    let ip = &a / &scale;
    let fp = &a % &scale;
    let mut s = String::new();
    if neg {
        s.push('-');
    }
    s.push_str(&ip.to_string());
    if digits > 0 {
        s.push('.');
        s.push_str(&format!("{:0>width$}", fp.to_string(), width = digits));
    }
    s
}

/// `"p/q (decimal)"` for human-facing output.
pub fn show(x: &Q) -> String {
    format!("{} ({})", x, to_decimal(x, 12))
}

/// Smallest `n ≥ 0` with `b^n ≥ target`, for rationals `b > 1`, `target > 0`.
pub fn ceil_log(b: &Q, target: &Q) -> u64 {
    let mut n = 0u64;
    let mut acc = Q::one();
    while &acc < target {
        acc *= b;
        n += 1;
    }
    n
}

/// Rational `r` with `|r − √x| ≤ 2^{-bits}`, for `x ≥ 0`.
pub fn sqrt_approx(x: &Q, bits: u32) -> Q {
    assert!(!x.is_negative(), "sqrt of a negative rational");
    // √(n/d) = √(n·d·4^bits) / (d·2^bits)
    let scale = BigInt::one() << (2 * bits as usize);
    let radicand = x.numer() * x.denom() * scale;
    let root = radicand.sqrt();
    Q::new(root, x.denom() * (BigInt::one() << bits as usize))
}

/// Rational with the smallest denominator in `[lo, hi]` (Stern–Brocot).
pub fn simplest_between(lo: &Q, hi: &Q) -> Q {
    let (lo, hi) = if lo <= hi { (lo.clone(), hi.clone()) } else { (hi.clone(), lo.clone()) };
    if hi.is_negative() {
        return -simplest_between(&-hi, &-lo);
    }
    if !lo.is_positive() {
        return Q::zero();
    }
    let fl = lo.floor();
    if fl == lo {
        return lo;
    }
    if &fl + Q::one() <= hi {
        return fl + Q::one();
    }
    let inner = simplest_between(&(Q::one() / (&hi - &fl)), &(Q::one() / (&lo - &fl)));
    fl + Q::one() / inner
}

/// Midpoint, `(a+b)/2`.
pub fn mid(a: &Q, b: &Q) -> Q {
    (a + b) / qi(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse_q("3/6").unwrap(), q(1, 2));
        assert_eq!(parse_q("-7").unwrap(), qi(-7));
        assert_eq!(parse_q("0.25").unwrap(), q(1, 4));
        assert_eq!(parse_q("-1.5").unwrap(), q(-3, 2));
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("abc").is_err());
    }

    #[test]
    fn simplest_rationals() {
        assert_eq!(simplest_between(&q(3, 10), &q(2, 5)), q(1, 3));
        assert_eq!(simplest_between(&q(2, 3), &q(2, 3)), q(2, 3));
        assert_eq!(simplest_between(&q(-1, 2), &q(1, 3)), qi(0));
        assert_eq!(simplest_between(&q(-5, 2), &q(-21, 10)), q(-5, 2));
        assert_eq!(simplest_between(&q(-12, 5), &q(-21, 10)), q(-7, 3));
        assert_eq!(simplest_between(&q(5, 4), &q(9, 4)), qi(2));
    }

    #[test]
    fn decimals() {
        assert_eq!(to_decimal(&q(2, 3), 4), "0.6666");
        assert_eq!(to_decimal(&q(-1, 2), 2), "-0.50");
        assert_eq!(to_decimal(&qi(3), 0), "3");
    }

    #[test]
    fn log_and_sqrt() {
        assert_eq!(ceil_log(&qi(2), &qi(2)), 1);
        assert_eq!(ceil_log(&qi(2), &qi(5)), 3);
        let r = sqrt_approx(&qi(2), 40);
        let err = (&r * &r - qi(2)).abs();
        assert!(err < q(1, 1 << 30));
        assert_eq!(sqrt_approx(&q(9, 4), 10), q(3, 2));
    }

    #[test]
    fn other_scalars() {
        assert_eq!(Rational64::parse_scalar("3/4").unwrap(), Rational64::new(3, 4));
        assert_eq!(f64::parse_scalar("1/4").unwrap(), 0.25);
    }
}
