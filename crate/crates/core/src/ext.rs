//! Extended scalars `{−∞} ∪ T ∪ {+∞}`.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Ext<T> {
    NegInf,
    Fin(T),
    PosInf,
}

pub use Ext::{Fin, NegInf, PosInf};

impl<T: Scalar> Ext<T> {
    pub fn zero() -> Self {
        Fin(T::zero())
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Fin(_))
    }

    pub fn finite(&self) -> Option<&T> {
        match self {
            Fin(v) => Some(v),
            _ => None,
        }
    }

    /// Finite value or an error naming `what`.
    pub fn expect_finite(&self, what: &str) -> Result<T> {
        self.finite()
            .cloned()
            .ok_or_else(|| Error::Arithmetic(format!("{what} is infinite")))
    }

    /// `self + x` for finite `x`; infinities absorb.
    pub fn add_fin(&self, x: &T) -> Self {
        match self {
            Fin(v) => Fin(v.clone() + x.clone()),
            other => other.clone(),
        }
    }

    pub fn sub_fin(&self, x: &T) -> Self {
        match self {
            Fin(v) => Fin(v.clone() - x.clone()),
            other => other.clone(),
        }
    }

    /// Multiplication by a finite scalar; `0·∞` is rejected.
    pub fn mul_fin(&self, x: &T) -> Result<Self> {
        match self {
            Fin(v) => Ok(Fin(v.clone() * x.clone())),
            inf => {
                if x.is_zero() {
                    Err(Error::Arithmetic("0 times infinity".into()))
                } else if x.is_positive() {
                    Ok(inf.clone())
                } else {
                    Ok(inf.neg())
                }
            }
        }
    }

    /// Sum of two extended values; `∞ − ∞` is rejected.
    pub fn add(&self, other: &Self) -> Result<Self> {
        match (self, other) {
            (Fin(a), Fin(b)) => Ok(Fin(a.clone() + b.clone())),
            (NegInf, PosInf) | (PosInf, NegInf) => {
                Err(Error::Arithmetic("infinity minus infinity".into()))
            }
            (NegInf, _) | (_, NegInf) => Ok(NegInf),
            (PosInf, _) | (_, PosInf) => Ok(PosInf),
        }
    }

    pub fn neg(&self) -> Self {
        match self {
            NegInf => PosInf,
            PosInf => NegInf,
            Fin(v) => Fin(-v.clone()),
        }
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "+inf" | "Infinity" => Ok(PosInf),
            "-inf" | "-Infinity" => Ok(NegInf),
            t => T::parse_scalar(t).map(Fin),
        }
    }
}

impl<T: Scalar> From<T> for Ext<T> {
    fn from(v: T) -> Self {
        Fin(v)
    }
}

impl<T: Scalar> PartialOrd for Ext<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Fin(a), Fin(b)) => a.partial_cmp(b),
            (NegInf, NegInf) | (PosInf, PosInf) => Some(Ordering::Equal),
            (NegInf, _) | (_, PosInf) => Some(Ordering::Less),
            (PosInf, _) | (_, NegInf) => Some(Ordering::Greater),
        }
    }
}

impl<T: fmt::Display> fmt::Display for Ext<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NegInf => write!(f, "-inf"),
            PosInf => write!(f, "inf"),
            Fin(v) => write!(f, "{v}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{qi, Q};

    #[test]
    fn ordering_and_absorption() {
        let a: Ext<Q> = Fin(qi(3));
        assert!(NegInf < a && a < PosInf);
        assert_eq!(a.clone().max(NegInf), a);
        assert_eq!(a.clone().min(PosInf), a);
        assert_eq!(PosInf::<Q>.add_fin(&qi(-5)), PosInf);
        assert_eq!(a.add(&PosInf).unwrap(), PosInf);
        assert!(PosInf::<Q>.add(&NegInf).is_err());
        assert!(PosInf::<Q>.mul_fin(&qi(0)).is_err());
        assert_eq!(PosInf::<Q>.mul_fin(&qi(-2)).unwrap(), NegInf);
    }

    #[test]
    fn parse_round_trip() {
        for s in ["inf", "-inf", "3/4", "-2"] {
            let e: Ext<Q> = Ext::parse(s).unwrap();
            assert_eq!(Ext::<Q>::parse(&e.to_string()).unwrap(), e);
        }
    }
}
