//! Exact rationals and their `"p/q"` text form.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serializer};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn int(n: impl Into<BigInt>) -> Rational {
    Rational::from_integer(n.into())
}

pub fn ratio(p: impl Into<BigInt>, q: impl Into<BigInt>) -> Rational {
    Rational::new(p.into(), q.into())
}

/// `2^-bits` as an exact rational.
pub fn dyadic(bits: u32) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << bits)
}

/// Formats as `p/q` with `q ≥ 1`, never as a decimal.
pub fn format(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `p/q` or a bare integer `p`.
pub fn parse(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::InvalidArgument(format!("not a rational \"p/q\": {s:?}"));
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().map_err(|_| bad())?;
            let q: BigInt = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(Rational::new(p, q))
        }
        None => Ok(int(s.parse::<BigInt>().map_err(|_| bad())?)),
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    // Scale down huge numerators/denominators before converting.
    match (r.numer().to_f64(), r.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            let shift = r.numer().bits().max(r.denom().bits()).saturating_sub(1000);
            let n = (r.numer() >> shift).to_f64().unwrap_or(0.0);
            let d = (r.denom() >> shift).to_f64().unwrap_or(f64::INFINITY);
            n / d
        }
    }
}

pub fn floor_to_int(r: &Rational) -> BigInt {
    r.numer().div_floor(r.denom())
}

pub fn min(a: &Rational, b: &Rational) -> Rational {
    if a <= b { a.clone() } else { b.clone() }
}

pub fn abs_diff(a: &Rational, b: &Rational) -> Rational {
    (a - b).abs()
}

pub mod serde_pq {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse(&s).map_err(serde::de::Error::custom)
    }
}

pub mod serde_pq_opt {
    use super::*;

    pub fn serialize<S: Serializer>(
        r: &Option<Rational>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        match r {
            Some(r) => s.serialize_some(&format(r)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Option<Rational>, D::Error> {
        let s = Option::<String>::deserialize(d)?;
        s.map(|s| parse(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// Big integers as decimal strings, so heights beyond `u64` survive JSON.
pub mod serde_bigint {
    use super::*;

    pub fn serialize<S: Serializer>(n: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
        match n.to_u64() {
            Some(small) => s.serialize_u64(small),
            None => s.serialize_str(&n.to_string()),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BigInt, D::Error> {
        IntRepr::deserialize(d)?.into_bigint()
    }
}

/// Integers as JSON numbers when they fit in `u64`, strings otherwise.
#[derive(Deserialize)]
#[serde(untagged)]
enum IntRepr {
    Num(i64),
    Str(String),
}

impl IntRepr {
    fn into_bigint<E: serde::de::Error>(self) -> std::result::Result<BigInt, E> {
        match self {
            IntRepr::Num(n) => Ok(BigInt::from(n)),
            IntRepr::Str(s) => s.trim().parse().map_err(E::custom),
        }
    }
}

pub mod serde_bigint_vec_opt {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(
        v: &Option<Vec<BigInt>>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let Some(v) = v else { return s.serialize_none() };
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for n in v {
            match n.to_u64() {
                Some(small) => seq.serialize_element(&small)?,
                None => seq.serialize_element(&n.to_string())?,
            }
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Option<Vec<BigInt>>, D::Error> {
        let v = Option::<Vec<IntRepr>>::deserialize(d)?;
        v.map(|v| v.into_iter().map(IntRepr::into_bigint).collect())
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pq_format_is_decimal_free() {
        assert_eq!(format(&ratio(6, 4)), "3/2");
        assert_eq!(format(&int(3)), "3/1");
        assert_eq!(format(&int(0)), "0/1");
        assert_eq!(format(&ratio(-1, 3)), "-1/3");
    }

    #[test]
    fn parse_accepts_pq_and_integers() {
        assert_eq!(parse("3/2").unwrap(), ratio(3, 2));
        assert_eq!(parse(" 10 ").unwrap(), int(10));
        assert!(parse("1/0").is_err());
        assert!(parse("0.5").is_err());
    }

    #[test]
    fn to_f64_handles_huge_terms() {
        let big = BigInt::one() << 3000u32;
        let r = Rational::new(big.clone() * 3, big * 4);
        assert_eq!(to_f64(&r), 0.75);
        let tiny = Rational::new(BigInt::one(), BigInt::one() << 2000u32);
        assert_eq!(to_f64(&tiny), 0.0);
    }
}
