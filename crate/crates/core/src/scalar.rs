use std::cmp::Ordering;
use std::fmt;

use num_traits::{Float, FromPrimitive};

/// Floating point scalar used by the expression evaluator and the quadrature
/// routines: `f32` or `f64`.
pub trait Scalar: Float + FromPrimitive + fmt::Debug + fmt::Display + Default + Send + Sync + 'static {
    /// Lossless-enough conversion from an `f64` constant.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// A point of the extended real line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtendedReal<T> {
    NegInf,
    Finite(T),
    PosInf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("ambiguous extended-real arithmetic ({0})")]
pub struct AmbiguousInfinity(pub &'static str);

impl<T: Scalar> ExtendedReal<T> {
    /// Maps a float onto the extended line; NaN is rejected.
    pub fn from_float(v: T) -> Option<Self> {
        if v.is_nan() {
            None
        } else if v == T::infinity() {
            Some(Self::PosInf)
        } else if v == T::neg_infinity() {
            Some(Self::NegInf)
        } else {
            Some(Self::Finite(v))
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Self::Finite(_))
    }

    pub fn finite(&self) -> Option<T> {
        match *self {
            Self::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn to_float(self) -> T {
        match self {
            Self::NegInf => T::neg_infinity(),
            Self::Finite(v) => v,
            Self::PosInf => T::infinity(),
        }
    }

    pub fn neg(self) -> Self {
        match self {
            Self::NegInf => Self::PosInf,
            Self::Finite(v) => Self::Finite(-v),
            Self::PosInf => Self::NegInf,
        }
    }

    /// `∞ + (−∞)` is the only ambiguous sum.
    pub fn add(self, other: Self) -> Result<Self, AmbiguousInfinity> {
        use ExtendedReal::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Ok(Self::from_float(a + b).unwrap_or(Finite(a + b))),
            (PosInf, NegInf) | (NegInf, PosInf) => Err(AmbiguousInfinity("inf - inf")),
            (PosInf, _) | (_, PosInf) => Ok(PosInf),
            (NegInf, _) | (_, NegInf) => Ok(NegInf),
        }
    }

    pub fn sub(self, other: Self) -> Result<Self, AmbiguousInfinity> {
        self.add(other.neg())
    }

    /// `0 · ∞` is ambiguous; any other product follows the sign rule.
    pub fn mul(self, other: Self) -> Result<Self, AmbiguousInfinity> {
        use ExtendedReal::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Ok(Finite(a * b)),
            (Finite(a), inf) | (inf, Finite(a)) => {
                if a == T::zero() {
                    Err(AmbiguousInfinity("0 * inf"))
                } else if a > T::zero() {
                    Ok(inf)
                } else {
                    Ok(inf.neg())
                }
            }
            (PosInf, PosInf) | (NegInf, NegInf) => Ok(PosInf),
            _ => Ok(NegInf),
        }
    }
}

impl<T: Scalar> PartialOrd for ExtendedReal<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.total_cmp(other))
    }
}

impl<T: Scalar> ExtendedReal<T> {
    pub fn total_cmp(&self, other: &Self) -> Ordering {
        use ExtendedReal::*;
        match (self, other) {
            (NegInf, NegInf) | (PosInf, PosInf) => Ordering::Equal,
            (NegInf, _) | (_, PosInf) => Ordering::Less,
            (_, NegInf) | (PosInf, _) => Ordering::Greater,
            (Finite(a), Finite(b)) => a.partial_cmp(b).unwrap_or(Ordering::Equal),
        }
    }
}

impl<T: Scalar> fmt::Display for ExtendedReal<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NegInf => f.write_str("-inf"),
            Self::PosInf => f.write_str("+inf"),
            Self::Finite(v) => write!(f, "{v}"),
        }
    }
}

impl<T: Scalar> From<T> for ExtendedReal<T> {
    fn from(v: T) -> Self {
        Self::from_float(v).unwrap_or(Self::Finite(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type E = ExtendedReal<f64>;

    #[test]
    fn ordering_is_total() {
        let mut v = vec![E::PosInf, E::Finite(1.0), E::NegInf, E::Finite(-3.0)];
        v.sort_by(|a, b| a.total_cmp(b));
        assert_eq!(v, vec![E::NegInf, E::Finite(-3.0), E::Finite(1.0), E::PosInf]);
    }

    #[test]
    fn ambiguous_forms_fault() {
        assert!(E::PosInf.add(E::NegInf).is_err());
        assert!(E::Finite(0.0).mul(E::PosInf).is_err());
        assert_eq!(E::Finite(-2.0).mul(E::PosInf).unwrap(), E::NegInf);
        assert_eq!(E::PosInf.add(E::Finite(5.0)).unwrap(), E::PosInf);
        assert_eq!(E::from_float(f64::NAN), None);
    }
}
