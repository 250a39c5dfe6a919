//! Scalar abstraction shared by the exact and floating-point code paths.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive, Zero};
use serde_json::Value;

/// Field-like coefficient type used throughout the crate.
///
/// Implemented for `f32`, `f64` and [`BigRational`]. Exact types report
/// `EXACT = true` and compare with `==` in [`Scalar::close`].
pub trait Scalar: Num + Signed + Clone + Debug + Display + PartialOrd + Send + Sync + 'static {
    const EXACT: bool;

    fn int(v: i64) -> Self;

    /// Exact for rationals (every finite double is a dyadic rational).
    fn real(v: f64) -> Self;

    fn approx(&self) -> f64;

    fn ratio(num: i64, den: i64) -> Self {
        Self::int(num) / Self::int(den)
    }

    fn count(v: u128) -> Self;

    /// Equality for exact types, relative closeness otherwise.
    fn close(&self, other: &Self, rel_tol: f64) -> bool {
        if Self::EXACT {
            return self == other;
        }
        let (a, b) = (self.approx(), other.approx());
        let scale = a.abs().max(b.abs()).max(1.0);
        (a - b).abs() <= rel_tol * scale
    }

    fn to_json(&self) -> Value;

    fn from_json(v: &Value) -> Option<Self>;

    fn powi(&self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc = acc * self.clone();
        }
        acc
    }
}

macro_rules! float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            const EXACT: bool = false;

            fn int(v: i64) -> Self {
                v as $t
            }

            fn real(v: f64) -> Self {
                v as $t
            }

            fn approx(&self) -> f64 {
                *self as f64
            }

            fn count(v: u128) -> Self {
                v as $t
            }

            fn to_json(&self) -> Value {
                serde_json::Number::from_f64(*self as f64)
                    .map(Value::Number)
                    .unwrap_or(Value::Null)
            }

            fn from_json(v: &Value) -> Option<Self> {
                match v {
                    Value::Number(n) => n.as_f64().map(|x| x as $t),
                    Value::String(s) => parse_rational(s).map(|r| ToPrimitive::to_f64(&r).unwrap_or(f64::NAN) as $t),
                    _ => None,
                }
            }
        }
    };
}

float_scalar!(f32);
float_scalar!(f64);

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn int(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }

    fn real(v: f64) -> Self {
        BigRational::from_float(v).expect("non-finite value cannot be represented exactly")
    }

    fn approx(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn count(v: u128) -> Self {
        BigRational::from_integer(BigInt::from_u128(v).expect("u128 fits in BigInt"))
    }

    fn to_json(&self) -> Value {
        Value::String(format!("{}/{}", self.numer(), self.denom()))
    }

    fn from_json(v: &Value) -> Option<Self> {
        match v {
            Value::String(s) => parse_rational(s),
            Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Some(Self::int(i))
                } else {
                    n.as_f64().and_then(BigRational::from_float)
                }
            }
            _ => None,
        }
    }
}

/// Parses `"a"`, `"a/b"` or a decimal literal such as `"0.25"` exactly.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    if let Ok(i) = s.parse::<BigInt>() {
        return Some(BigRational::from_integer(i));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(k) => (&s[..k], s[k + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    let digits: BigInt = format!("{int}{frac}").parse().ok()?;
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut r = BigRational::from_integer(digits);
    if scale >= 0 {
        r *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -r } else { r })
}

/// `n!` as a scalar.
pub fn factorial<T: Scalar>(n: usize) -> T {
    let mut acc = T::one();
    for k in 2..=n {
        acc = acc * T::int(k as i64);
    }
    acc
}

pub(crate) fn sign<T: Scalar>(negative: bool) -> T {
    if negative {
        -T::one()
    } else {
        T::one()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rationals() {
        assert_eq!(parse_rational("3/4"), Some(BigRational::ratio(3, 4)));
        assert_eq!(parse_rational("-0.25"), Some(BigRational::ratio(-1, 4)));
        assert_eq!(parse_rational("1e-2"), Some(BigRational::ratio(1, 100)));
        assert_eq!(parse_rational("7"), Some(BigRational::int(7)));
        assert_eq!(parse_rational("x"), None);
        assert_eq!(parse_rational("1/0"), None);
    }

    #[test]
    fn json_round_trip() {
        let r = BigRational::ratio(-5, 3);
        assert_eq!(BigRational::from_json(&r.to_json()), Some(r));
        let x = 0.125f64;
        assert_eq!(f64::from_json(&x.to_json()), Some(x));
    }

    #[test]
    fn float_conversion_is_exact_for_rationals() {
        let r = BigRational::real(0.1);
        assert_eq!(r.approx(), 0.1);
    }
}
