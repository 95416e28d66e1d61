use std::cmp::Ordering;
use std::fmt;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, One, Signed, ToPrimitive, Zero};

/// A numeric constant inside an expression.
///
/// Rational literals stay exact until evaluation so that polynomial
/// cancellations fold to a literal zero. Any operation that would overflow
/// the `i64` rational demotes the result to a float.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Number {
    Rational(Ratio<i64>),
    Float(f64),
}

impl Number {
    pub const ZERO: Number = Number::Rational(Ratio::new_raw(0, 1));
    pub const ONE: Number = Number::Rational(Ratio::new_raw(1, 1));

    pub fn int(v: i64) -> Self {
        Number::Rational(Ratio::from_integer(v))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Number::Rational(Ratio::new(num, den))
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Number::Rational(r) => r.to_f64().unwrap_or_else(|| *r.numer() as f64 / *r.denom() as f64),
            Number::Float(v) => v,
        }
    }

    pub fn is_zero(self) -> bool {
        match self {
            Number::Rational(r) => r.is_zero(),
            Number::Float(v) => v == 0.0,
        }
    }

    pub fn is_one(self) -> bool {
        match self {
            Number::Rational(r) => r.is_one(),
            Number::Float(v) => v == 1.0,
        }
    }

    pub fn is_negative(self) -> bool {
        match self {
            Number::Rational(r) => r.is_negative(),
            Number::Float(v) => v < 0.0,
        }
    }

    /// True when the value is an integer that prints without a fraction bar.
    pub fn is_integer(self) -> bool {
        matches!(self, Number::Rational(r) if r.is_integer())
    }

    pub fn neg(self) -> Number {
        match self {
            Number::Rational(r) => match r.numer().checked_neg() {
                Some(n) => Number::Rational(Ratio::new_raw(n, *r.denom())),
                None => Number::Float(-self.to_f64()),
            },
            Number::Float(v) => Number::Float(-v),
        }
    }

    pub fn abs(self) -> Number {
        if self.is_negative() {
            self.neg()
        } else {
            self
        }
    }

    pub fn add(self, other: Number) -> Number {
        match (self, other) {
            (Number::Rational(a), Number::Rational(b)) => a
                .checked_add(&b)
                .map(Number::Rational)
                .unwrap_or_else(|| Number::Float(self.to_f64() + other.to_f64())),
            _ => Number::Float(self.to_f64() + other.to_f64()),
        }
    }

    pub fn sub(self, other: Number) -> Number {
        match (self, other) {
            (Number::Rational(a), Number::Rational(b)) => a
                .checked_sub(&b)
                .map(Number::Rational)
                .unwrap_or_else(|| Number::Float(self.to_f64() - other.to_f64())),
            _ => Number::Float(self.to_f64() - other.to_f64()),
        }
    }

    pub fn mul(self, other: Number) -> Number {
        match (self, other) {
            (Number::Rational(a), Number::Rational(b)) => a
                .checked_mul(&b)
                .map(Number::Rational)
                .unwrap_or_else(|| Number::Float(self.to_f64() * other.to_f64())),
            _ => Number::Float(self.to_f64() * other.to_f64()),
        }
    }

    /// Division; `None` when the divisor is zero.
    pub fn div(self, other: Number) -> Option<Number> {
        if other.is_zero() {
            return None;
        }
        Some(match (self, other) {
            (Number::Rational(a), Number::Rational(b)) => a
                .checked_div(&b)
                .map(Number::Rational)
                .unwrap_or_else(|| Number::Float(self.to_f64() / other.to_f64())),
            _ => Number::Float(self.to_f64() / other.to_f64()),
        })
    }

    /// Integer power; `None` for a negative power of zero.
    pub fn powi(self, exp: i32) -> Option<Number> {
        if exp < 0 && self.is_zero() {
            return None;
        }
        if let Number::Rational(r) = self {
            let mut acc = Ratio::one();
            let base = if exp < 0 { r.recip() } else { r };
            let mut ok = true;
            for _ in 0..exp.unsigned_abs() {
                match acc.checked_mul(&base) {
                    Some(v) => acc = v,
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                return Some(Number::Rational(acc));
            }
        }
        Some(Number::Float(self.to_f64().powi(exp)))
    }

    pub(crate) fn total_cmp(&self, other: &Number) -> Ordering {
        self.to_f64()
            .total_cmp(&other.to_f64())
            .then_with(|| self.variant_rank().cmp(&other.variant_rank()))
    }

    fn variant_rank(&self) -> u8 {
        match self {
            Number::Rational(_) => 0,
            Number::Float(_) => 1,
        }
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Rational(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Number::Rational(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            // `{:?}` is the shortest representation that round-trips.
            Number::Float(v) => write!(f, "{v:?}"),
        }
    }
}
