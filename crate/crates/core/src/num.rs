//! Scalar abstraction and exact-arithmetic helpers.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Arbitrary-precision rational.
pub type Rational = BigRational;

/// Field-like scalar used by the generic geometry: floats or exact rationals.
pub trait Scalar:
    Clone + PartialOrd + fmt::Debug + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Whether arithmetic is exact (no rounding snaps needed).
    const EXACT: bool = false;

    fn from_rational(r: &Rational) -> Self;

    /// Largest integer not above `self`.
    fn floor_i64(&self) -> i64;

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_i64_exact(v: i64) -> Self {
        Self::from_i64(v).expect("integer fits scalar")
    }

    fn half() -> Self {
        Self::one() / (Self::one() + Self::one())
    }

    /// JSON form: numbers for floats, "p/q" strings for rationals.
    fn to_json(&self) -> serde_json::Value;
}

impl Scalar for f64 {
    fn from_rational(r: &Rational) -> Self {
        ratio_to_f64(r)
    }
    fn floor_i64(&self) -> i64 {
        self.floor() as i64
    }
    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::from(*self)
    }
}

impl Scalar for f32 {
    fn from_rational(r: &Rational) -> Self {
        ratio_to_f64(r) as f32
    }
    fn floor_i64(&self) -> i64 {
        self.floor() as i64
    }
    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::from(*self as f64)
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }
    fn floor_i64(&self) -> i64 {
        self.floor().to_integer().to_i64().expect("floor fits i64")
    }
    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::String(fmt_rational(self))
    }
}

pub fn rat(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

pub fn int(p: i64) -> Rational {
    Rational::from_integer(BigInt::from(p))
}

pub fn big(v: u64) -> BigUint {
    BigUint::from(v)
}

pub fn ubig_to_rat(v: &BigUint) -> Rational {
    Rational::from_integer(BigInt::from(v.clone()))
}

/// 2^e for any integer e.
pub fn pow2(e: i64) -> Rational {
    let p = BigInt::one() << (e.unsigned_abs() as usize);
    if e >= 0 {
        Rational::from_integer(p)
    } else {
        Rational::new(BigInt::one(), p)
    }
}

pub fn ratio_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

/// Exact rational value of a finite float.
pub fn f64_to_ratio(x: f64) -> Result<Rational> {
    Rational::from_float(x).ok_or_else(|| Error::invalid("value", format!("{x} is not finite")))
}

/// Always "p/q", including integers ("3/1").
pub fn fmt_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Accepts "p/q", "p", or a finite decimal like "0.25" (converted exactly).
pub fn parse_rational(s: &str) -> Result<Rational> {
    let t = s.trim();
    if let Some((p, q)) = t.split_once('/') {
        let p: BigInt = p
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad numerator in {s:?}")))?;
        let q: BigInt = q
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?;
        if q.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((w, f)) = t.split_once('.') {
        let neg = w.starts_with('-');
        let digits = format!("{}{}", w.trim_start_matches(['-', '+']), f);
        let n: BigInt = digits
            .parse()
            .map_err(|_| Error::Parse(format!("bad decimal {s:?}")))?;
        let d = num_traits::pow(BigInt::from(10u32), f.len());
        let r = Rational::new(n, d);
        return Ok(if neg { -r } else { r });
    }
    let n: BigInt = t
        .parse()
        .map_err(|_| Error::Parse(format!("bad rational {s:?}")))?;
    Ok(Rational::from_integer(n))
}

/// Dyadic rational k/2^n written as "k/2^n".
pub fn fmt_dyadic(k: i64, n: u32) -> String {
    format!("{k}/2^{n}")
}

pub fn floor_rat(r: &Rational) -> BigInt {
    r.floor().to_integer()
}

pub fn ceil_div(a: &BigUint, b: &BigUint) -> BigUint {
    let (q, r) = a.div_rem(b);
    if r.is_zero() {
        q
    } else {
        q + 1u32
    }
}

pub fn product(xs: &[BigUint]) -> BigUint {
    xs.iter().fold(BigUint::one(), |acc, x| acc * x)
}

pub fn min_max<T: PartialOrd + Clone>(xs: &[T]) -> Option<(T, T)> {
    let mut it = xs.iter();
    let first = it.next()?.clone();
    let mut lo = first.clone();
    let mut hi = first;
    for x in it {
        if *x < lo {
            lo = x.clone();
        }
        if *x > hi {
            hi = x.clone();
        }
    }
    Some((lo, hi))
}

/// serde adapters writing rationals as "p/q" strings and big integers as decimal strings.
pub mod serde_str {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub mod rational {
        use super::*;
        pub fn serialize<S: Serializer>(
            r: &Rational,
            s: S,
        ) -> std::result::Result<S::Ok, S::Error> {
            s.serialize_str(&fmt_rational(r))
        }
        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> std::result::Result<Rational, D::Error> {
            let v = serde_json::Value::deserialize(d)?;
            value_to_rational(&v).map_err(serde::de::Error::custom)
        }
    }

    pub mod rational_vec {
        use super::*;
        pub fn serialize<S: Serializer>(
            r: &[Rational],
            s: S,
        ) -> std::result::Result<S::Ok, S::Error> {
            s.collect_seq(r.iter().map(fmt_rational))
        }
        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> std::result::Result<Vec<Rational>, D::Error> {
            let v = Vec::<serde_json::Value>::deserialize(d)?;
            v.iter()
                .map(value_to_rational)
                .collect::<Result<Vec<_>>>()
                .map_err(serde::de::Error::custom)
        }
    }

    pub mod biguint_vec {
        use super::*;
        pub fn serialize<S: Serializer>(
            r: &[BigUint],
            s: S,
        ) -> std::result::Result<S::Ok, S::Error> {
            s.collect_seq(r.iter().map(|x| x.to_string()))
        }
        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> std::result::Result<Vec<BigUint>, D::Error> {
            let v = Vec::<serde_json::Value>::deserialize(d)?;
            v.iter()
                .map(value_to_biguint)
                .collect::<Result<Vec<_>>>()
                .map_err(serde::de::Error::custom)
        }
    }

    pub fn value_to_rational(v: &serde_json::Value) -> Result<Rational> {
        match v {
            serde_json::Value::String(s) => parse_rational(s),
            serde_json::Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Ok(int(i))
                } else {
                    f64_to_ratio(n.as_f64().unwrap_or(f64::NAN))
                }
            }
            other => Err(Error::Parse(format!("expected rational, got {other}"))),
        }
    }

    pub fn value_to_biguint(v: &serde_json::Value) -> Result<BigUint> {
        match v {
            serde_json::Value::String(s) => s
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad integer {s:?}"))),
            serde_json::Value::Number(n) => n
                .as_u64()
                .map(BigUint::from)
                .ok_or_else(|| Error::Parse(format!("expected non-negative integer, got {n}"))),
            other => Err(Error::Parse(format!("expected integer, got {other}"))),
        }
    }
}
