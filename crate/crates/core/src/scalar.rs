//! Arithmetic backends.
//!
//! Every algorithm in this crate is generic over [`Scalar`]. Two backends are
//! provided: [`Rational`] (exact, arbitrary precision) and `f64` (fast, with
//! an absolute comparison tolerance of [`FLOAT_TOLERANCE`]).

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Absolute tolerance used by every float comparison.
pub const FLOAT_TOLERANCE: f64 = 1e-9;

pub trait Scalar:
    Clone
    + fmt::Debug
    + fmt::Display
    + PartialEq
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Sum
    + Send
    + Sync
    + Serialize
    + for<'de> Deserialize<'de>
    + 'static
{
    /// True for backends where comparisons are exact.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    fn from_u128(v: u128) -> Self;
    fn to_f64(&self) -> f64;

    /// Parses a decimal literal (`0.125`, `3`, `1e-3`) or a fraction (`1/8`).
    fn parse_literal(s: &str) -> Result<Self>;

    /// Smallest integer not below `self`.
    fn ceil_i64(&self) -> i64;

    fn is_integer(&self) -> bool;

    /// Slack allowed by comparisons: zero for exact backends.
    fn tolerance() -> Self;

    fn ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num) / Self::from_i64(den)
    }

    fn is_zero_tol(&self) -> bool {
        self.approx_eq(&Self::zero())
    }

    fn approx_le(&self, other: &Self) -> bool {
        self.clone() <= other.clone() + Self::tolerance()
    }

    fn approx_ge(&self, other: &Self) -> bool {
        other.approx_le(self)
    }

    fn approx_eq(&self, other: &Self) -> bool {
        self.approx_le(other) && other.approx_le(self)
    }

    fn is_nonnegative(&self) -> bool {
        self.approx_ge(&Self::zero())
    }

    /// Strictly positive beyond the tolerance.
    fn is_positive(&self) -> bool {
        !self.approx_le(&Self::zero())
    }

    /// Strictly negative beyond the tolerance.
    fn is_negative(&self) -> bool {
        !self.approx_ge(&Self::zero())
    }

    fn clamp_unit(&self) -> Self {
        if *self < Self::zero() {
            Self::zero()
        } else if *self > Self::one() {
            Self::one()
        } else {
            self.clone()
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_u128(v: u128) -> Self {
        v as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }

    fn parse_literal(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((num, den)) = s.split_once('/') {
            let num: f64 = num.trim().parse().map_err(|_| bad_literal(s))?;
            let den: f64 = den.trim().parse().map_err(|_| bad_literal(s))?;
            if den == 0.0 {
                return Err(bad_literal(s));
            }
            return Ok(num / den);
        }
        let v: f64 = s.parse().map_err(|_| bad_literal(s))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(bad_literal(s))
        }
    }

    fn ceil_i64(&self) -> i64 {
        self.ceil() as i64
    }

    fn is_integer(&self) -> bool {
        (self - self.round()).abs() <= FLOAT_TOLERANCE
    }

    fn tolerance() -> Self {
        FLOAT_TOLERANCE
    }
}

fn bad_literal(s: &str) -> Error {
    Error::Parse(format!("invalid numeric literal `{s}`"))
}

/// Exact rational number.
///
/// Values whose reduced numerator and denominator fit in `i128` are kept
/// inline and use checked machine arithmetic; anything larger moves to an
/// arbitrary-precision representation. Results are exact either way.
///
/// Serialized as a string (`"3/8"`, or `"2"` for integers) so values survive
/// a JSON round trip without loss.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Rational(Repr);

// Canonical: `Big` only holds values that do not fit `Small`.
#[derive(Clone, PartialEq, Eq, Hash)]
enum Repr {
    Small(Ratio<i128>),
    Big(BigRational),
}

impl Rational {
    pub fn new(num: i64, den: i64) -> Self {
        Rational::small(Ratio::new(num as i128, den as i128))
    }

    pub fn from_big(value: BigRational) -> Self {
        match (value.numer().to_i128(), value.denom().to_i128()) {
            (Some(n), Some(d)) if n != i128::MIN => Rational(Repr::Small(Ratio::new_raw(n, d))),
            _ => Rational(Repr::Big(value)),
        }
    }

    pub fn to_big(&self) -> BigRational {
        match &self.0 {
            Repr::Small(x) => BigRational::new_raw(BigInt::from(*x.numer()), BigInt::from(*x.denom())),
            Repr::Big(x) => x.clone(),
        }
    }

    fn small(x: Ratio<i128>) -> Self {
        if *x.numer() == i128::MIN || *x.denom() == i128::MIN {
            Rational(Repr::Big(BigRational::new(BigInt::from(*x.numer()), BigInt::from(*x.denom()))))
        } else {
            Rational(Repr::Small(x))
        }
    }

    fn binop(
        &self,
        rhs: &Rational,
        small: fn(&Ratio<i128>, &Ratio<i128>) -> Option<Ratio<i128>>,
        big: fn(BigRational, BigRational) -> BigRational,
    ) -> Rational {
        if let (Repr::Small(a), Repr::Small(b)) = (&self.0, &rhs.0) {
            if let Some(x) = small(a, b) {
                return Rational::small(x);
            }
        }
        Rational::from_big(big(self.to_big(), rhs.to_big()))
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> Ordering {
        match (&self.0, &other.0) {
            (Repr::Small(a), Repr::Small(b)) => a.cmp(b),
            _ => self.to_big().cmp(&other.to_big()),
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small(x) => write!(f, "{x}"),
            Repr::Big(x) => write!(f, "{x}"),
        }
    }
}

impl FromStr for Rational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        <Rational as Scalar>::parse_literal(s)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $checked:ident) => {
        impl $trait for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                self.binop(&rhs, |a, b| a.$checked(b), |a, b| $trait::$method(a, b))
            }
        }
        impl<'a> $trait<&'a Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                self.binop(rhs, |a, b| a.$checked(b), |a, b| $trait::$method(a, b))
            }
        }
    };
}

forward_binop!(Add, add, checked_add);
forward_binop!(Sub, sub, checked_sub);
forward_binop!(Mul, mul, checked_mul);
forward_binop!(Div, div, checked_div);

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        match self.0 {
            Repr::Small(x) => Rational(Repr::Small(-x)),
            Repr::Big(x) => Rational::from_big(-x),
        }
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Self {
        iter.fold(<Rational as Scalar>::zero(), |acc, x| acc + x)
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn zero() -> Self {
        Rational(Repr::Small(Ratio::zero()))
    }
    fn one() -> Self {
        Rational(Repr::Small(Ratio::one()))
    }
    fn from_i64(v: i64) -> Self {
        Rational(Repr::Small(Ratio::from_integer(v as i128)))
    }
    fn from_u128(v: u128) -> Self {
        Rational::from_big(BigRational::from_integer(BigInt::from(v)))
    }
    fn to_f64(&self) -> f64 {
        self.to_big().to_f64().unwrap_or(f64::NAN)
    }

    fn parse_literal(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((num, den)) = s.split_once('/') {
            let num: BigInt = num.trim().parse().map_err(|_| bad_literal(s))?;
            let den: BigInt = den.trim().parse().map_err(|_| bad_literal(s))?;
            if den.is_zero() {
                return Err(bad_literal(s));
            }
            return Ok(Rational::from_big(BigRational::new(num, den)));
        }
        parse_decimal(s).map(Rational::from_big).ok_or_else(|| bad_literal(s))
    }

    fn ceil_i64(&self) -> i64 {
        match &self.0 {
            Repr::Small(x) => x.ceil().to_integer().to_i64().unwrap_or(i64::MAX),
            Repr::Big(x) => x.ceil().to_integer().to_i64().unwrap_or(i64::MAX),
        }
    }

    fn is_integer(&self) -> bool {
        match &self.0 {
            Repr::Small(x) => x.is_integer(),
            Repr::Big(x) => x.is_integer(),
        }
    }

    fn tolerance() -> Self {
        Self::zero()
    }

    // Exact comparisons skip the tolerance arithmetic.
    fn approx_le(&self, other: &Self) -> bool {
        self <= other
    }

    fn is_nonnegative(&self) -> bool {
        match &self.0 {
            Repr::Small(x) => !x.is_negative(),
            Repr::Big(x) => !x.is_negative(),
        }
    }
}

/// Exact value of a decimal literal with optional exponent.
fn parse_decimal(s: &str) -> Option<BigRational> {
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int_part}{frac_part}").parse().ok()?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut value = BigRational::from_integer(digits);
    if scale >= 0 {
        value *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if negative { -value } else { value })
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(deserializer)?;
        let text = match &value {
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Number(n) => n.to_string(),
            other => return Err(serde::de::Error::custom(format!("expected a rational, got {other}"))),
        };
        <Rational as Scalar>::parse_literal(&text).map_err(serde::de::Error::custom)
    }
}
