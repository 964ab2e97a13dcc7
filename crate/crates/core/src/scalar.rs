//! Scalar abstraction shared by every operation in the crate.
//!
//! The interval algebra, kernels and transfer operators only need an ordered
//! field, so they are written once against [`Scalar`]. [`Rational`] gives
//! bit-exact results; `f64` and `f32` give fast approximate ones.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Arbitrary-precision rational number, always in lowest terms.
pub type Rational = BigRational;

/// An ordered field usable as the coefficient type of systems and functions.
pub trait Scalar:
    Clone + Debug + PartialOrd + Num + Signed + FromPrimitive + Send + Sync + 'static
{
    /// True when arithmetic is exact.
    const EXACT: bool;

    fn to_f64(&self) -> f64;

    /// Nearest representable value to `x`.
    fn from_f64(x: f64) -> Self;

    /// Whether the value should be treated as zero. Exact types compare with
    /// zero; floating types allow a small absolute slack.
    fn is_negligible(&self) -> bool;

    /// Canonical string form used in JSON and CSV output.
    fn to_repr(&self) -> String;

    /// Parses `p/q`, an integer, or a decimal literal such as `0.25`.
    fn parse_repr(s: &str) -> Result<Self>;

    fn ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num).expect("i64 is representable") / Self::from_i64(den).expect("i64 is representable")
    }

    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize is representable")
    }

    fn two() -> Self {
        Self::one() + Self::one()
    }

    fn max_of(a: Self, b: Self) -> Self {
        if a >= b {
            a
        } else {
            b
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if a <= b {
            a
        } else {
            b
        }
    }
}

/// Compares two scalars, treating incomparable values (NaN) as equal.
pub(crate) fn cmp<T: Scalar>(a: &T, b: &T) -> std::cmp::Ordering {
    a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal)
}

fn parse_decimal_rational(s: &str) -> Option<Rational> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.')?;
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    let denom = num_traits::pow(BigInt::from(10u32), frac_part.len());
    let value = BigRational::new(numer, denom);
    Some(if neg { -value } else { value })
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or_else(|| {
            let n = self.numer().to_f64().unwrap_or(f64::NAN);
            let d = self.denom().to_f64().unwrap_or(f64::NAN);
            n / d
        })
    }

    fn from_f64(x: f64) -> Self {
        <Rational as FromPrimitive>::from_f64(x).unwrap_or_else(Rational::zero)
    }

    fn is_negligible(&self) -> bool {
        self.is_zero()
    }

    fn to_repr(&self) -> String {
        if self.denom().is_one() {
            self.numer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }

    fn parse_repr(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((p, q)) = s.split_once('/') {
            let p: BigInt = p.trim().parse().map_err(|_| Error::Parse(s.to_string()))?;
            let q: BigInt = q.trim().parse().map_err(|_| Error::Parse(s.to_string()))?;
            if q.is_zero() {
                return Err(Error::DivisionByZero);
            }
            return Ok(BigRational::new(p, q));
        }
        if let Ok(p) = s.parse::<BigInt>() {
            return Ok(BigRational::from_integer(p));
        }
        parse_decimal_rational(s).ok_or_else(|| Error::Parse(s.to_string()))
    }
}

macro_rules! impl_float_scalar {
    ($f:ty, $eps:expr) => {
        impl Scalar for $f {
            const EXACT: bool = false;

            fn to_f64(&self) -> f64 {
                *self as f64
            }

            fn from_f64(x: f64) -> Self {
                x as $f
            }

            fn is_negligible(&self) -> bool {
                self.abs() <= $eps
            }

            fn to_repr(&self) -> String {
                format!("{:?}", self)
            }

            fn parse_repr(s: &str) -> Result<Self> {
                let s = s.trim();
                if let Some((p, q)) = s.split_once('/') {
                    let p: $f = p.trim().parse().map_err(|_| Error::Parse(s.to_string()))?;
                    let q: $f = q.trim().parse().map_err(|_| Error::Parse(s.to_string()))?;
                    if q == 0.0 {
                        return Err(Error::DivisionByZero);
                    }
                    return Ok(p / q);
                }
                s.parse().map_err(|_| Error::Parse(s.to_string()))
            }
        }
    };
}

impl_float_scalar!(f64, 1e-12);
impl_float_scalar!(f32, 1e-5);

/// Serde adapters writing scalars as their canonical strings.
pub mod serde_scalar {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    use super::Scalar;

    pub fn serialize<T: Scalar, S: Serializer>(value: &T, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&value.to_repr())
    }

    pub fn deserialize<'de, T: Scalar, D: Deserializer<'de>>(d: D) -> Result<T, D::Error> {
        let raw = String::deserialize(d)?;
        T::parse_repr(&raw).map_err(D::Error::custom)
    }

    pub mod vec {
        use serde::{de::Error as _, ser::SerializeSeq, Deserialize, Deserializer, Serializer};

        use crate::scalar::Scalar;

        pub fn serialize<T: Scalar, S: Serializer>(values: &[T], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(values.len()))?;
            for v in values {
                seq.serialize_element(&v.to_repr())?;
            }
            seq.end()
        }

        pub fn deserialize<'de, T: Scalar, D: Deserializer<'de>>(d: D) -> Result<Vec<T>, D::Error> {
            let raw = Vec::<String>::deserialize(d)?;
            raw.iter().map(|s| T::parse_repr(s).map_err(D::Error::custom)).collect()
        }
    }

    pub mod option {
        use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

        use crate::scalar::Scalar;

        pub fn serialize<T: Scalar, S: Serializer>(value: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
            match value {
                Some(v) => s.serialize_some(&v.to_repr()),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, T: Scalar, D: Deserializer<'de>>(d: D) -> Result<Option<T>, D::Error> {
            let raw = Option::<String>::deserialize(d)?;
            raw.map(|s| T::parse_repr(&s).map_err(D::Error::custom)).transpose()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Rational {
        Rational::parse_repr(s).unwrap()
    }

    #[test]
    fn rational_reprs_are_canonical() {
        assert_eq!(q("2/4").to_repr(), "1/2");
        assert_eq!(q("6/3").to_repr(), "2");
        assert_eq!(q("-3/-6").to_repr(), "1/2");
        assert_eq!(q("0.25").to_repr(), "1/4");
        assert_eq!(q("-1.5").to_repr(), "-3/2");
        assert_eq!(q(".5").to_repr(), "1/2");
    }

    #[test]
    fn zero_denominator_is_an_error() {
        assert_eq!(Rational::parse_repr("1/0"), Err(Error::DivisionByZero));
        assert_eq!(f64::parse_repr("1/0"), Err(Error::DivisionByZero));
        assert!(Rational::parse_repr("abc").is_err());
        assert!(Rational::parse_repr(".").is_err());
    }

    #[test]
    fn float_scalars_parse_fractions() {
        assert_eq!(f64::parse_repr("1/4").unwrap(), 0.25);
        assert_eq!(f64::parse_repr("0.5").unwrap(), 0.5);
        assert_eq!(0.5f64.to_repr(), "0.5");
        assert_eq!(1.0f64.to_repr(), "1.0");
    }

    #[test]
    fn ratio_helper_is_exact_for_rationals() {
        assert_eq!(Rational::ratio(11, 24), q("11/24"));
        assert_eq!(<Rational as Scalar>::to_f64(&q("1/4")), 0.25);
    }
}
