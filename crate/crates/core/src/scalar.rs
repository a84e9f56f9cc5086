//! Scalar abstraction shared by plain floats and forward-mode dual numbers.
//!
//! Every pointwise geometric routine in this crate is generic over [`Scalar`],
//! so the same code path can be evaluated on `f64`, on [`crate::dual::Dual`]
//! (to differentiate it), or on nested duals (to differentiate a quantity
//! that already contains derivatives, e.g. `d(dψ)` or `δ(δψ)`).

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
    + 'static
{
    /// Lift a constant.
    fn cst(c: f64) -> Self;
    /// Real (value) part.
    fn re(&self) -> f64;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn powi(&self, k: i32) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn one() -> Self {
        Self::cst(1.0)
    }

    fn scale(&self, c: f64) -> Self {
        self.clone() * Self::cst(c)
    }

    fn abs(&self) -> Self {
        if self.re() < 0.0 {
            -self.clone()
        } else {
            self.clone()
        }
    }
}

impl Scalar for f64 {
    #[inline]
    fn cst(c: f64) -> Self {
        c
    }
    #[inline]
    fn re(&self) -> f64 {
        *self
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
    fn powi(&self, k: i32) -> Self {
        f64::powi(*self, k)
    }
    #[inline]
    fn scale(&self, c: f64) -> Self {
        self * c
    }
}

/// Sum of an iterator of scalars (empty sum is zero).
pub fn sum<S: Scalar, I: IntoIterator<Item = S>>(it: I) -> S {
    let mut it = it.into_iter();
    match it.next() {
        None => S::zero(),
        Some(first) => it.fold(first, |acc, v| acc + v),
    }
}

/// Real parts of a slice.
pub fn re_vec<S: Scalar>(xs: &[S]) -> Vec<f64> {
    xs.iter().map(Scalar::re).collect()
}

/// Lift a slice of floats.
pub fn lift<S: Scalar>(xs: &[f64]) -> Vec<S> {
    xs.iter().map(|&v| S::cst(v)).collect()
}
