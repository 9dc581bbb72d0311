//! Scalar abstraction shared by plain `f64` evaluation and LD-derivative
//! propagation.
//!
//! Model right-hand sides are written once, generically over [`Scalar`], and
//! evaluated either on `f64` (trajectory integration, finite differences) or
//! on [`LdScalar`](crate::ld::LdScalar) (sensitivities). Both instantiations
//! perform the same floating-point operations in the same order, so the value
//! parts agree bitwise.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Clone
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn value(&self) -> f64;

    /// A constant carrying the same direction width as `self`.
    fn lift(&self, c: f64) -> Self;

    fn abs(&self) -> Self;
    fn min(&self, other: &Self) -> Self;
    fn max(&self, other: &Self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn tan(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn tanh(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn lift(&self, c: f64) -> Self {
        c
    }
    #[inline]
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    #[inline]
    fn min(&self, other: &Self) -> Self {
        // first argument wins ties, matching the LD rule
        if *self <= *other {
            *self
        } else {
            *other
        }
    }
    #[inline]
    fn max(&self, other: &Self) -> Self {
        if *self >= *other {
            *self
        } else {
            *other
        }
    }
    #[inline]
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    #[inline]
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    #[inline]
    fn tan(&self) -> Self {
        f64::tan(*self)
    }
    #[inline]
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    #[inline]
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    #[inline]
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    #[inline]
    fn tanh(&self) -> Self {
        f64::tanh(*self)
    }
    #[inline]
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
}

/// Smooth log-sum-exp approximation of `min(a, b)` with sharpness `n`:
/// `-ln(exp(-n a) + exp(-n b)) / n`, evaluated with a max-shift so large `n`
/// cannot overflow.
pub fn soft_min<T: Scalar>(a: &T, b: &T, n: f64) -> T {
    let shift = if a.value() <= b.value() {
        a.clone()
    } else {
        b.clone()
    };
    let ea = ((a.clone() - shift.clone()) * (-n)).exp();
    let eb = ((b.clone() - shift.clone()) * (-n)).exp();
    shift - (ea + eb).ln() / n
}
