//! Exact rational scalars and their text encoding.
//!
//! Every value on the verification path is a [`Rational`]. The wire format is
//! the string `"p/q"` (or `"p"` for integers); decimal literals such as
//! `"0.125"` or `"1e-3"` are accepted on input and converted exactly.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

/// Arbitrary-precision rational in canonical form (positive denominator,
/// coprime numerator and denominator).
pub type Rational = BigRational;

/// Build a rational from a small numerator/denominator pair.
///
/// Panics if `den == 0`.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

/// Convert a slice of small integers into a rational vector.
pub fn ints(vs: &[i64]) -> Vec<Rational> {
    vs.iter().map(|&v| int(v)).collect()
}

pub fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(Rational::zero(), |acc, (x, y)| acc + x * y)
}

/// `max(v, 0)`.
pub fn relu(v: &Rational) -> Rational {
    if v.is_positive() {
        v.clone()
    } else {
        Rational::zero()
    }
}

/// `2^k` as a rational.
pub fn pow2(k: u32) -> Rational {
    Rational::from_integer(BigInt::one() << k)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse {input:?} as a rational: {reason}")]
pub struct ParseRationalError {
    pub input: String,
    pub reason: &'static str,
}

/// Parse `"p/q"`, an integer, or a decimal literal (optional exponent) exactly.
pub fn parse_rational(s: &str) -> Result<Rational, ParseRationalError> {
    let fail = |reason| ParseRationalError {
        input: s.to_string(),
        reason,
    };
    let t = s.trim();
    if t.is_empty() {
        return Err(fail("empty string"));
    }
    if let Some((p, q)) = t.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| fail("bad numerator"))?;
        let q: BigInt = q.trim().parse().map_err(|_| fail("bad denominator"))?;
        if q.is_zero() {
            return Err(fail("zero denominator"));
        }
        return Ok(Rational::new(p, q));
    }

    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(i) => {
            let e: i64 = t[i + 1..].parse().map_err(|_| fail("bad exponent"))?;
            (&t[..i], e)
        }
        None => (t, 0),
    };
    let (negative, digits) = match mantissa.as_bytes().first() {
        Some(b'-') => (true, &mantissa[1..]),
        Some(b'+') => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(fail("no digits"));
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(fail("unexpected character"));
    }
    if exponent.unsigned_abs() > 10_000 {
        return Err(fail("exponent out of range"));
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut numer: BigInt = all_digits.parse().map_err(|_| fail("bad digits"))?;
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i64;
    let ten = BigInt::from(10);
    let value = if scale >= 0 {
        Rational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(value)
}

/// Canonical text form: `"p"` for integers, `"p/q"` otherwise.
pub fn format_rational(r: &Rational) -> String {
    r.to_string()
}

/// Lossy conversion for reports and timing tables only.
pub fn to_f64(r: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// Serde adapter for a single rational encoded as `"p/q"` (numbers accepted on input).
pub mod serde_rational {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        d.deserialize_any(RationalVisitor)
    }
}

/// Serde adapter for `Vec<Rational>`.
pub mod serde_rational_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(format_rational))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let raw: Vec<Wire> = Vec::deserialize(d)?;
        Ok(raw.into_iter().map(|w| w.0).collect())
    }
}

/// Serde adapter for `Vec<Vec<Rational>>`.
pub mod serde_rational_mat {
    use super::*;

    pub fn serialize<S: Serializer>(m: &[Vec<Rational>], s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<String>> = m
            .iter()
            .map(|row| row.iter().map(format_rational).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Rational>>, D::Error> {
        let raw: Vec<Vec<Wire>> = Vec::deserialize(d)?;
        Ok(raw
            .into_iter()
            .map(|row| row.into_iter().map(|w| w.0).collect())
            .collect())
    }
}

/// Serde adapter for `Option<Rational>`.
pub mod serde_rational_opt {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match r {
            Some(r) => s.serialize_some(&format_rational(r)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        let raw: Option<Wire> = Option::deserialize(d)?;
        Ok(raw.map(|w| w.0))
    }
}

/// Newtype used when a rational has to travel through generic serde code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wire(pub Rational);

impl Serialize for Wire {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(&self.0))
    }
}

impl<'de> Deserialize<'de> for Wire {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(RationalVisitor).map(Wire)
    }
}

struct RationalVisitor;

impl Visitor<'_> for RationalVisitor {
    type Value = Rational;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a rational as \"p/q\" string or a JSON number")
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
        parse_rational(v).map_err(E::custom)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
        Ok(int(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
        Ok(Rational::from_integer(BigInt::from(v)))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Rational, E> {
        if !v.is_finite() {
            return Err(E::custom("non-finite number"));
        }
        // Shortest round-trip decimal, so `0.1` in the file becomes exactly 1/10.
        parse_rational(&v.to_string()).map_err(E::custom)
    }
}
