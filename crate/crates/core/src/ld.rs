//! Forward propagation of lexicographic directional derivatives.
//!
//! An [`LdScalar`] carries a value together with one row of the LD-derivative
//! `f'(x0; M)` for a fixed directions matrix `M` with `k` columns. Smooth
//! elementals act on the row by their ordinary derivative; `abs` and `min`/`max`
//! use the first-sign function and the shifted lexicographic minimum, which
//! pick a branch by comparing the value first and then the directional
//! derivatives in column order.
//!
//! Operations never panic. A width mismatch, a domain violation or a
//! non-finite intermediate marks the result as faulted; the fault travels
//! through every later operation and surfaces through [`LdScalar::check`].

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LdError {
    #[error("direction width mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },
    #[error("{op}: argument {value} outside the elemental's domain")]
    Domain { op: &'static str, value: f64 },
    #[error("{op}: non-finite value or derivative")]
    NonFinite { op: &'static str },
}

/// A function value stacked on top of its direction row, `[head, tail]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedRow {
    pub head: f64,
    pub tail: Vec<f64>,
}

impl AugmentedRow {
    pub fn new(head: f64, tail: impl Into<Vec<f64>>) -> Self {
        Self {
            head,
            tail: tail.into(),
        }
    }

    pub fn k(&self) -> usize {
        self.tail.len()
    }

    fn check_finite(&self) -> Result<(), LdError> {
        if self.head.is_finite() && self.tail.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(LdError::NonFinite { op: "fsign" })
        }
    }
}

#[inline]
fn first_sign(head: f64, tail: impl Iterator<Item = f64>) -> i8 {
    std::iter::once(head)
        .chain(tail)
        .find(|v| *v != 0.0)
        .map_or(0, |v| if v > 0.0 { 1 } else { -1 })
}

/// Sign of the first nonzero entry of `[head, tail]`, or 0 when all vanish.
pub fn fsign(row: &AugmentedRow) -> Result<i8, LdError> {
    row.check_finite()?;
    Ok(first_sign(row.head, row.tail.iter().copied()))
}

/// Shifted lexicographic minimum: the tail of whichever argument is
/// lexicographically smaller. Exact ties return `a`'s tail.
pub fn slmin(a: &AugmentedRow, b: &AugmentedRow) -> Result<Vec<f64>, LdError> {
    if a.k() != b.k() {
        return Err(LdError::Dimension {
            left: a.k(),
            right: b.k(),
        });
    }
    a.check_finite()?;
    b.check_finite()?;
    let s = first_sign(
        a.head - b.head,
        a.tail.iter().zip(&b.tail).map(|(x, y)| x - y),
    );
    Ok(if s <= 0 { a.tail.clone() } else { b.tail.clone() })
}

thread_local! {
    static BRANCHES: RefCell<Option<Vec<i8>>> = const { RefCell::new(None) };
}

/// Run `f` while recording every nonsmooth selection made by `LdScalar`
/// elementals on this thread, in evaluation order.
///
/// `abs` records its first sign (-1, 0, 1); `min` and `max` record 0 when the
/// first argument is selected and 1 otherwise.
pub fn record_branches<R>(f: impl FnOnce() -> R) -> (R, Vec<i8>) {
    let prev = BRANCHES.with(|b| b.replace(Some(Vec::new())));
    let out = f();
    let rec = BRANCHES.with(|b| b.replace(prev)).unwrap_or_default();
    (out, rec)
}

#[inline]
fn note_branch(id: i8) {
    BRANCHES.with(|b| {
        if let Some(v) = b.borrow_mut().as_mut() {
            v.push(id);
        }
    });
}

/// A value with its row of `k` lexicographic directional derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct LdScalar {
    val: f64,
    der: Vec<f64>,
    fault: Option<Box<LdError>>,
}

impl LdScalar {
    /// Checked constructor; rejects non-finite input.
    pub fn new(val: f64, der: impl Into<Vec<f64>>) -> Result<Self, LdError> {
        Self::unchecked(val, der.into()).finish("new").check()
    }

    fn unchecked(val: f64, der: Vec<f64>) -> Self {
        Self {
            val,
            der,
            fault: None,
        }
    }

    /// A constant: value `val`, all `k` directional derivatives zero.
    pub fn constant(val: f64, k: usize) -> Self {
        Self::unchecked(val, vec![0.0; k])
    }

    /// Independent variable seeded with the unit direction `index`.
    pub fn variable(val: f64, k: usize, index: usize) -> Self {
        let mut der = vec![0.0; k];
        der[index] = 1.0;
        Self::unchecked(val, der)
    }

    pub fn val(&self) -> f64 {
        self.val
    }

    pub fn der(&self) -> &[f64] {
        &self.der
    }

    pub fn k(&self) -> usize {
        self.der.len()
    }

    pub fn fault(&self) -> Option<&LdError> {
        self.fault.as_deref()
    }

    pub fn row(&self) -> AugmentedRow {
        AugmentedRow::new(self.val, self.der.clone())
    }

    pub fn into_parts(self) -> (f64, Vec<f64>) {
        (self.val, self.der)
    }

    /// Surface the first fault recorded along this value's history.
    pub fn check(self) -> Result<Self, LdError> {
        match self.fault {
            Some(f) => Err(*f),
            None => Ok(self),
        }
    }

    fn fail(mut self, e: LdError) -> Self {
        if self.fault.is_none() {
            self.fault = Some(Box::new(e));
        }
        self
    }

    fn finish(self, op: &'static str) -> Self {
        if self.fault.is_none()
            && !(self.val.is_finite() && self.der.iter().all(|d| d.is_finite()))
        {
            return self.fail(LdError::NonFinite { op });
        }
        self
    }

    /// `val <- val`, `der <- da * der + db * other.der`.
    fn combine(mut self, other: &LdScalar, val: f64, da: f64, db: f64, op: &'static str) -> Self {
        if self.fault.is_none() {
            if let Some(f) = &other.fault {
                self.fault = Some(f.clone());
            } else if self.der.len() != other.der.len() {
                let e = LdError::Dimension {
                    left: self.der.len(),
                    right: other.der.len(),
                };
                self = self.fail(e);
            } else {
                for (d, o) in self.der.iter_mut().zip(&other.der) {
                    *d = da * *d + db * o;
                }
            }
        }
        self.val = val;
        self.finish(op)
    }

    /// Smooth unary map with derivative `slope` at the current value.
    fn chain(mut self, val: f64, slope: f64, op: &'static str) -> Self {
        if self.fault.is_none() {
            for d in self.der.iter_mut() {
                *d *= slope;
            }
        }
        self.val = val;
        self.finish(op)
    }

    fn domain(self, op: &'static str) -> Self {
        let value = self.val;
        self.fail(LdError::Domain { op, value })
    }

    fn lex_sign_diff(&self, other: &LdScalar) -> i8 {
        first_sign(
            self.val - other.val,
            self.der.iter().zip(&other.der).map(|(x, y)| x - y),
        )
    }

    fn select(self, other: &LdScalar, take_self: bool, val: f64, op: &'static str) -> Self {
        note_branch(if take_self { 0 } else { 1 });
        let mut out = if take_self {
            self
        } else {
            let fault = self.fault.or_else(|| other.fault.clone());
            LdScalar {
                val: other.val,
                der: other.der.clone(),
                fault,
            }
        };
        out.val = val;
        out.finish(op)
    }

    fn binary_guard(&self, other: &LdScalar) -> Option<LdError> {
        if let Some(f) = self.fault.as_deref().or(other.fault.as_deref()) {
            return Some(f.clone());
        }
        if self.der.len() != other.der.len() {
            return Some(LdError::Dimension {
                left: self.der.len(),
                right: other.der.len(),
            });
        }
        None
    }

    /// LD rule for `min`: value minimum, direction row chosen by `slmin`.
    pub fn min_ld(self, other: &LdScalar) -> Self {
        if let Some(e) = self.binary_guard(other) {
            return self.fail(e);
        }
        let val = f64::min(self.val, other.val);
        let take_self = self.lex_sign_diff(other) <= 0;
        self.select(other, take_self, val, "min")
    }

    /// LD rule for `max`, i.e. `-min(-x, -y)`.
    pub fn max_ld(self, other: &LdScalar) -> Self {
        if let Some(e) = self.binary_guard(other) {
            return self.fail(e);
        }
        let val = f64::max(self.val, other.val);
        let take_self = other.lex_sign_diff(&self) <= 0;
        self.select(other, take_self, val, "max")
    }

    /// LD rule for `abs`: `fsign([val, der]) * der`.
    pub fn abs_ld(self) -> Self {
        if self.fault.is_some() {
            return self;
        }
        let s = first_sign(self.val, self.der.iter().copied());
        note_branch(s);
        let val = self.val.abs();
        self.chain(val, f64::from(s), "abs")
    }

    pub fn sin_ld(self) -> Self {
        let (v, d) = (self.val.sin(), self.val.cos());
        self.chain(v, d, "sin")
    }

    pub fn cos_ld(self) -> Self {
        let (v, d) = (self.val.cos(), -self.val.sin());
        self.chain(v, d, "cos")
    }

    pub fn tan_ld(self) -> Self {
        let c = self.val.cos();
        if c == 0.0 {
            return self.domain("tan");
        }
        let v = self.val.tan();
        self.chain(v, 1.0 / (c * c), "tan")
    }

    pub fn exp_ld(self) -> Self {
        let v = self.val.exp();
        self.chain(v, v, "exp")
    }

    pub fn ln_ld(self) -> Self {
        if self.val <= 0.0 {
            return self.domain("ln");
        }
        let (v, d) = (self.val.ln(), 1.0 / self.val);
        self.chain(v, d, "ln")
    }

    pub fn sqrt_ld(self) -> Self {
        if self.val <= 0.0 {
            return self.domain("sqrt");
        }
        let v = self.val.sqrt();
        self.chain(v, 0.5 / v, "sqrt")
    }

    pub fn tanh_ld(self) -> Self {
        let v = self.val.tanh();
        self.chain(v, 1.0 - v * v, "tanh")
    }

    pub fn powi_ld(self, n: i32) -> Self {
        if n < 0 && self.val == 0.0 {
            return self.domain("powi");
        }
        let v = self.val.powi(n);
        let d = if n == 0 {
            0.0
        } else {
            f64::from(n) * self.val.powi(n - 1)
        };
        self.chain(v, d, "powi")
    }

    /// Real power; requires a positive base.
    pub fn powf_ld(self, e: f64) -> Self {
        if self.val <= 0.0 {
            return self.domain("powf");
        }
        let v = self.val.powf(e);
        let d = e * self.val.powf(e - 1.0);
        self.chain(v, d, "powf")
    }

    fn add_ld(self, o: &LdScalar) -> Self {
        let v = self.val + o.val;
        self.combine(o, v, 1.0, 1.0, "add")
    }

    fn sub_ld(self, o: &LdScalar) -> Self {
        let v = self.val - o.val;
        self.combine(o, v, 1.0, -1.0, "sub")
    }

    fn mul_ld(self, o: &LdScalar) -> Self {
        let (a, b) = (self.val, o.val);
        self.combine(o, a * b, b, a, "mul")
    }

    fn div_ld(self, o: &LdScalar) -> Self {
        if o.val == 0.0 {
            let e = LdError::Domain {
                op: "div",
                value: 0.0,
            };
            return self.fail(e);
        }
        let (a, b) = (self.val, o.val);
        self.combine(o, a / b, 1.0 / b, -a / (b * b), "div")
    }
}

/// `|x|` under the LD calculus.
pub fn ld_abs(x: &LdScalar) -> Result<LdScalar, LdError> {
    x.clone().abs_ld().check()
}

/// `min(x, y)` under the LD calculus.
pub fn ld_min(x: &LdScalar, y: &LdScalar) -> Result<LdScalar, LdError> {
    x.clone().min_ld(y).check()
}

/// `max(x, y)` under the LD calculus.
pub fn ld_max(x: &LdScalar, y: &LdScalar) -> Result<LdScalar, LdError> {
    x.clone().max_ld(y).check()
}

macro_rules! ld_binop {
    ($tr:ident, $m:ident, $imp:ident) => {
        impl $tr<LdScalar> for LdScalar {
            type Output = LdScalar;
            #[inline]
            fn $m(self, rhs: LdScalar) -> LdScalar {
                self.$imp(&rhs)
            }
        }
        impl<'a> $tr<&'a LdScalar> for LdScalar {
            type Output = LdScalar;
            #[inline]
            fn $m(self, rhs: &'a LdScalar) -> LdScalar {
                self.$imp(rhs)
            }
        }
        impl<'a> $tr<&'a LdScalar> for &'a LdScalar {
            type Output = LdScalar;
            #[inline]
            fn $m(self, rhs: &'a LdScalar) -> LdScalar {
                self.clone().$imp(rhs)
            }
        }
    };
}

ld_binop!(Add, add, add_ld);
ld_binop!(Sub, sub, sub_ld);
ld_binop!(Mul, mul, mul_ld);
ld_binop!(Div, div, div_ld);

impl Add<f64> for LdScalar {
    type Output = LdScalar;
    fn add(mut self, c: f64) -> LdScalar {
        self.val += c;
        self.finish("add")
    }
}

impl Sub<f64> for LdScalar {
    type Output = LdScalar;
    fn sub(mut self, c: f64) -> LdScalar {
        self.val -= c;
        self.finish("sub")
    }
}

impl Mul<f64> for LdScalar {
    type Output = LdScalar;
    fn mul(self, c: f64) -> LdScalar {
        let v = self.val * c;
        self.chain(v, c, "mul")
    }
}

impl Div<f64> for LdScalar {
    type Output = LdScalar;
    fn div(self, c: f64) -> LdScalar {
        if c == 0.0 {
            return self.fail(LdError::Domain {
                op: "div",
                value: 0.0,
            });
        }
        let v = self.val / c;
        self.chain(v, 1.0 / c, "div")
    }
}

impl Add<LdScalar> for f64 {
    type Output = LdScalar;
    fn add(self, x: LdScalar) -> LdScalar {
        x + self
    }
}

impl Sub<LdScalar> for f64 {
    type Output = LdScalar;
    fn sub(self, x: LdScalar) -> LdScalar {
        -x + self
    }
}

impl Mul<LdScalar> for f64 {
    type Output = LdScalar;
    fn mul(self, x: LdScalar) -> LdScalar {
        x * self
    }
}

impl Neg for LdScalar {
    type Output = LdScalar;
    fn neg(self) -> LdScalar {
        let v = -self.val;
        self.chain(v, -1.0, "neg")
    }
}

impl Scalar for LdScalar {
    fn value(&self) -> f64 {
        self.val
    }
    fn lift(&self, c: f64) -> Self {
        LdScalar::constant(c, self.k())
    }
    fn abs(&self) -> Self {
        self.clone().abs_ld()
    }
    fn min(&self, other: &Self) -> Self {
        self.clone().min_ld(other)
    }
    fn max(&self, other: &Self) -> Self {
        self.clone().max_ld(other)
    }
    fn sin(&self) -> Self {
        self.clone().sin_ld()
    }
    fn cos(&self) -> Self {
        self.clone().cos_ld()
    }
    fn tan(&self) -> Self {
        self.clone().tan_ld()
    }
    fn exp(&self) -> Self {
        self.clone().exp_ld()
    }
    fn ln(&self) -> Self {
        self.clone().ln_ld()
    }
    fn sqrt(&self) -> Self {
        self.clone().sqrt_ld()
    }
    fn tanh(&self) -> Self {
        self.clone().tanh_ld()
    }
    fn powi(&self, n: i32) -> Self {
        self.clone().powi_ld(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ld(v: f64, d: &[f64]) -> LdScalar {
        LdScalar::new(v, d.to_vec()).unwrap()
    }

    #[test]
    fn fsign_examples() {
        assert_eq!(fsign(&AugmentedRow::new(0.0, vec![0.0; 3])).unwrap(), 0);
        assert_eq!(
            fsign(&AugmentedRow::new(0.0, vec![0.0, -2.0, 5.0])).unwrap(),
            -1
        );
        assert_eq!(fsign(&AugmentedRow::new(3.0, vec![-9.0, -9.0])).unwrap(), 1);
    }

    #[test]
    fn fsign_rejects_non_finite() {
        let row = AugmentedRow::new(0.0, vec![f64::NAN]);
        assert!(matches!(fsign(&row), Err(LdError::NonFinite { .. })));
    }

    #[test]
    fn slmin_examples() {
        let r = |h, t: &[f64]| AugmentedRow::new(h, t.to_vec());
        assert_eq!(
            slmin(&r(1.0, &[0.0, 0.0]), &r(2.0, &[5.0, 5.0])).unwrap(),
            vec![0.0, 0.0]
        );
        assert_eq!(
            slmin(&r(1.0, &[3.0, 0.0]), &r(1.0, &[2.0, 7.0])).unwrap(),
            vec![2.0, 7.0]
        );
        assert_eq!(
            slmin(&r(1.0, &[2.0, 0.0]), &r(1.0, &[2.0, 7.0])).unwrap(),
            vec![2.0, 0.0]
        );
    }

    #[test]
    fn slmin_rejects_width_mismatch() {
        let a = AugmentedRow::new(1.0, vec![0.0]);
        let b = AugmentedRow::new(1.0, vec![0.0, 1.0]);
        assert_eq!(
            slmin(&a, &b),
            Err(LdError::Dimension { left: 1, right: 2 })
        );
    }

    #[test]
    fn abs_examples() {
        let r = ld_abs(&ld(3.0, &[1.0, 0.0])).unwrap();
        assert_eq!((r.val(), r.der()), (3.0, &[1.0, 0.0][..]));
        let r = ld_abs(&ld(-3.0, &[1.0, 0.0])).unwrap();
        assert_eq!((r.val(), r.der()), (3.0, &[-1.0, 0.0][..]));
        let r = ld_abs(&ld(0.0, &[0.0, -2.0, 5.0])).unwrap();
        assert_eq!(r.val(), 0.0);
        assert_eq!(r.der(), &[0.0, 2.0, -5.0]);
    }

    #[test]
    fn min_examples() {
        let r = ld_min(&ld(1.0, &[9.0, 9.0]), &ld(2.0, &[0.0, 0.0])).unwrap();
        assert_eq!((r.val(), r.der()), (1.0, &[9.0, 9.0][..]));
        let r = ld_min(&ld(2.0, &[1.0, 0.0]), &ld(2.0, &[0.0, 1.0])).unwrap();
        assert_eq!((r.val(), r.der()), (2.0, &[0.0, 1.0][..]));
        let r = ld_min(&ld(-5.0, &[1.0, 1.0]), &ld(-5.0, &[1.0, 1.0])).unwrap();
        assert_eq!((r.val(), r.der()), (-5.0, &[1.0, 1.0][..]));
    }

    #[test]
    fn max_breaks_value_ties_lexicographically() {
        let r = ld_max(&ld(2.0, &[1.0, 0.0]), &ld(2.0, &[0.0, 1.0])).unwrap();
        assert_eq!(r.der(), &[1.0, 0.0]);
        let r = ld_max(&ld(2.0, &[0.0, 0.0]), &ld(2.0, &[0.0, 3.0])).unwrap();
        assert_eq!(r.der(), &[0.0, 3.0]);
    }

    #[test]
    fn product_and_sine() {
        let r = (ld(2.0, &[1.0, 0.0]) * ld(3.0, &[0.0, 1.0])).check().unwrap();
        assert_eq!((r.val(), r.der()), (6.0, &[3.0, 2.0][..]));
        let r = ld(0.0, &[1.0, 0.0]).sin_ld().check().unwrap();
        assert_eq!((r.val(), r.der()), (0.0, &[1.0, 0.0][..]));
    }

    #[test]
    fn width_mismatch_is_reported_after_arithmetic() {
        let e = (ld(1.0, &[1.0]) + ld(1.0, &[1.0, 0.0])).check().unwrap_err();
        assert_eq!(e, LdError::Dimension { left: 1, right: 2 });
    }

    #[test]
    fn domain_errors_name_the_elemental() {
        let e = ld(-1.0, &[1.0]).ln_ld().check().unwrap_err();
        assert_eq!(e, LdError::Domain { op: "ln", value: -1.0 });
        let e = ld(0.0, &[1.0]).sqrt_ld().check().unwrap_err();
        assert!(matches!(e, LdError::Domain { op: "sqrt", .. }));
        let e = (ld(1.0, &[1.0]) / ld(0.0, &[0.0])).check().unwrap_err();
        assert!(matches!(e, LdError::Domain { op: "div", .. }));
    }

    #[test]
    fn faults_propagate_through_later_operations() {
        let bad = ld(-1.0, &[1.0]).ln_ld();
        let later = (bad * ld(2.0, &[0.0]) + 3.0).exp_ld().abs_ld();
        assert!(matches!(later.check(), Err(LdError::Domain { op: "ln", .. })));
    }

    #[test]
    fn overflow_is_flagged_not_poisoned() {
        let e = ld(1000.0, &[1.0]).exp_ld().check().unwrap_err();
        assert_eq!(e, LdError::NonFinite { op: "exp" });
    }

    #[test]
    fn branch_recording_captures_selections() {
        let ((), rec) = record_branches(|| {
            let x = ld(1.0, &[1.0]);
            let y = ld(2.0, &[0.0]);
            let _ = x.clone().min_ld(&y);
            let _ = x.clone().max_ld(&y);
            let _ = (-x).abs_ld();
        });
        assert_eq!(rec, vec![0, 1, -1]);
        // outside a recording scope nothing is kept
        let _ = ld(1.0, &[1.0]).abs_ld();
        let ((), rec) = record_branches(|| ());
        assert!(rec.is_empty());
    }
}
