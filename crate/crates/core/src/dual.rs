//! Multivariate truncated Taylor arithmetic ("dual numbers" up to order 3).
//!
//! A [`Dual`] carries a value together with its gradient, Hessian and third
//! derivative tensor with respect to `n` seeded variables. Arithmetic
//! propagates them exactly through the Leibniz and Faà di Bruno rules, so the
//! only error left in a derivative is floating-point round-off.
//!
//! Constants carry empty derivative buffers; they combine with seeded values
//! without allocating. The coefficient type `S` is itself a [`Scalar`], which
//! allows nesting (`Dual<Dual<f64>>`) for derivatives of derivatives.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct Dual<S> {
    order: u8,
    v: S,
    /// `n` first partials (empty for constants).
    g: Vec<S>,
    /// `n*n` second partials, row-major (empty unless order >= 2).
    h: Vec<S>,
    /// `n*n*n` third partials (empty unless order >= 3).
    t: Vec<S>,
}

impl<S: Scalar> Dual<S> {
    pub fn constant(v: S) -> Self {
        Dual { order: 0, v, g: Vec::new(), h: Vec::new(), t: Vec::new() }
    }

    /// Seed variable `i` of `n` with value `v`, tracking derivatives up to `order`.
    pub fn variable(v: S, i: usize, n: usize, order: u8) -> Self {
        assert!((1..=3).contains(&order), "dual order must be 1..=3");
        let mut g = vec![S::zero(); n];
        g[i] = S::one();
        let h = if order >= 2 { vec![S::zero(); n * n] } else { Vec::new() };
        let t = if order >= 3 { vec![S::zero(); n * n * n] } else { Vec::new() };
        Dual { order, v, g, h, t }
    }

    pub fn value(&self) -> &S {
        &self.v
    }

    pub fn nvars(&self) -> usize {
        self.g.len()
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    fn is_const(&self) -> bool {
        self.g.is_empty()
    }

    /// First partial `∂_i`.
    pub fn d1(&self, i: usize) -> S {
        self.g.get(i).cloned().unwrap_or_else(S::zero)
    }

    /// Second partial `∂_i∂_j`.
    pub fn d2(&self, i: usize, j: usize) -> S {
        let n = self.g.len();
        self.h.get(i * n + j).cloned().unwrap_or_else(S::zero)
    }

    /// Third partial `∂_i∂_j∂_k`.
    pub fn d3(&self, i: usize, j: usize, k: usize) -> S {
        let n = self.g.len();
        self.t.get((i * n + j) * n + k).cloned().unwrap_or_else(S::zero)
    }

    fn map_all(&self, f: impl Fn(&S) -> S) -> Self {
        Dual {
            order: self.order,
            v: f(&self.v),
            g: self.g.iter().map(&f).collect(),
            h: self.h.iter().map(&f).collect(),
            t: self.t.iter().map(&f).collect(),
        }
    }

    /// Chain rule for a unary function with derivatives `f[0..=3]` at the value.
    fn chain(&self, f: [S; 4]) -> Self {
        let [f0, f1, f2, f3] = f;
        if self.is_const() {
            return Dual::constant(f0);
        }
        let n = self.g.len();
        let u = &self.g;
        let g: Vec<S> = u.iter().map(|ui| f1.clone() * ui.clone()).collect();
        let mut h = Vec::new();
        if self.order >= 2 {
            h.reserve(n * n);
            for i in 0..n {
                for j in 0..n {
                    let mut v = f2.clone() * u[i].clone() * u[j].clone();
                    if !self.h.is_empty() {
                        v = v + f1.clone() * self.h[i * n + j].clone();
                    }
                    h.push(v);
                }
            }
        }
        let mut t = Vec::new();
        if self.order >= 3 {
            t.reserve(n * n * n);
            let uh = |i: usize, j: usize| self.h[i * n + j].clone();
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut v = f3.clone() * u[i].clone() * u[j].clone() * u[k].clone();
                        v = v + f2.clone()
                            * (uh(i, j) * u[k].clone()
                                + uh(i, k) * u[j].clone()
                                + uh(j, k) * u[i].clone());
                        v = v + f1.clone() * self.t[(i * n + j) * n + k].clone();
                        t.push(v);
                    }
                }
            }
        }
        Dual { order: self.order, v: f0, g, h, t }
    }

    fn recip(&self) -> Self {
        let inv = S::one() / self.v.clone();
        if self.is_const() {
            return Dual::constant(inv);
        }
        let inv2 = inv.clone() * inv.clone();
        let f1 = -inv2.clone();
        let f2 = inv2.clone() * inv.clone() * S::cst(2.0);
        let f3 = if self.order >= 3 { -(inv2.clone() * inv2) * S::cst(6.0) } else { S::zero() };
        self.chain([inv, f1, f2, f3])
    }
}

impl<S: Scalar> Add for Dual<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        match (self.is_const(), rhs.is_const()) {
            (true, true) => Dual::constant(self.v + rhs.v),
            (true, false) => Dual { v: self.v + rhs.v, ..rhs },
            (false, true) => Dual { v: self.v + rhs.v, ..self },
            (false, false) => {
                let zip = |a: Vec<S>, b: Vec<S>| -> Vec<S> {
                    if a.is_empty() {
                        return b;
                    }
                    if b.is_empty() {
                        return a;
                    }
                    a.into_iter().zip(b).map(|(x, y)| x + y).collect()
                };
                Dual {
                    order: self.order.max(rhs.order),
                    v: self.v + rhs.v,
                    g: zip(self.g, rhs.g),
                    h: zip(self.h, rhs.h),
                    t: zip(self.t, rhs.t),
                }
            }
        }
    }
}

impl<S: Scalar> Neg for Dual<S> {
    type Output = Self;
    fn neg(self) -> Self {
        self.map_all(|x| -x.clone())
    }
}

impl<S: Scalar> Sub for Dual<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl<S: Scalar> Mul for Dual<S> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        if self.is_const() {
            let c = self.v;
            return rhs.map_all(|x| c.clone() * x.clone());
        }
        if rhs.is_const() {
            let c = rhs.v;
            return self.map_all(|x| x.clone() * c.clone());
        }
        let n = self.g.len();
        debug_assert_eq!(n, rhs.g.len(), "dual numbers seeded with different variable counts");
        let order = self.order.max(rhs.order);
        let (a, b) = (&self, &rhs);
        let g: Vec<S> = (0..n)
            .map(|i| a.g[i].clone() * b.v.clone() + a.v.clone() * b.g[i].clone())
            .collect();
        let ah = |i: usize, j: usize| if a.h.is_empty() { S::zero() } else { a.h[i * n + j].clone() };
        let bh = |i: usize, j: usize| if b.h.is_empty() { S::zero() } else { b.h[i * n + j].clone() };
        let mut h = Vec::new();
        if order >= 2 {
            h.reserve(n * n);
            for i in 0..n {
                for j in 0..n {
                    h.push(
                        ah(i, j) * b.v.clone()
                            + a.g[i].clone() * b.g[j].clone()
                            + a.g[j].clone() * b.g[i].clone()
                            + a.v.clone() * bh(i, j),
                    );
                }
            }
        }
        let mut t = Vec::new();
        if order >= 3 {
            let at = |i: usize| if a.t.is_empty() { S::zero() } else { a.t[i].clone() };
            let bt = |i: usize| if b.t.is_empty() { S::zero() } else { b.t[i].clone() };
            t.reserve(n * n * n);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let idx = (i * n + j) * n + k;
                        t.push(
                            at(idx) * b.v.clone()
                                + ah(i, j) * b.g[k].clone()
                                + ah(i, k) * b.g[j].clone()
                                + ah(j, k) * b.g[i].clone()
                                + a.g[i].clone() * bh(j, k)
                                + a.g[j].clone() * bh(i, k)
                                + a.g[k].clone() * bh(i, j)
                                + a.v.clone() * bt(idx),
                        );
                    }
                }
            }
        }
        Dual { order, v: a.v.clone() * b.v.clone(), g, h, t }
    }
}

impl<S: Scalar> Div for Dual<S> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        if rhs.is_const() {
            let c = rhs.v;
            return self.map_all(|x| x.clone() / c.clone());
        }
        self * rhs.recip()
    }
}

impl<S: Scalar> Scalar for Dual<S> {
    fn cst(c: f64) -> Self {
        Dual::constant(S::cst(c))
    }

    fn re(&self) -> f64 {
        self.v.re()
    }

    fn sin(&self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.chain([s.clone(), c.clone(), -s, -c])
    }

    fn cos(&self) -> Self {
        let (s, c) = (self.v.sin(), self.v.cos());
        self.chain([c.clone(), -s.clone(), -c, s])
    }

    fn exp(&self) -> Self {
        let e = self.v.exp();
        self.chain([e.clone(), e.clone(), e.clone(), e])
    }

    fn ln(&self) -> Self {
        let inv = S::one() / self.v.clone();
        let inv2 = inv.clone() * inv.clone();
        let f3 = inv2.clone() * inv.clone() * S::cst(2.0);
        self.chain([self.v.ln(), inv, -inv2, f3])
    }

    fn sqrt(&self) -> Self {
        let s = self.v.sqrt();
        let inv = S::one() / self.v.clone();
        let f1 = S::cst(0.5) / s.clone();
        let f2 = f1.clone() * inv.clone() * S::cst(-0.5);
        let f3 = f2.clone() * inv * S::cst(-1.5);
        self.chain([s, f1, f2, f3])
    }

    fn powi(&self, k: i32) -> Self {
        let kf = k as f64;
        let coef = [1.0, kf, kf * (kf - 1.0), kf * (kf - 1.0) * (kf - 2.0)];
        let mut f: [S; 4] = [S::zero(), S::zero(), S::zero(), S::zero()];
        for (j, c) in coef.iter().enumerate() {
            if *c != 0.0 && (j == 0 || (j as u8) <= self.order) {
                f[j] = self.v.powi(k - j as i32).scale(*c);
            }
        }
        self.chain(f)
    }

    fn scale(&self, c: f64) -> Self {
        self.map_all(|x| x.scale(c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(v: f64, i: usize, n: usize) -> Dual<f64> {
        Dual::variable(v, i, n, 3)
    }

    #[test]
    fn product_of_two_variables() {
        let x = var(1.0, 0, 2);
        let y = var(2.0, 1, 2);
        let p = x * y;
        assert_eq!(*p.value(), 2.0);
        assert_eq!(p.d1(0), 2.0);
        assert_eq!(p.d1(1), 1.0);
        assert_eq!(p.d2(0, 1), 1.0);
        assert_eq!(p.d2(1, 0), 1.0);
        assert_eq!(p.d2(0, 0), 0.0);
    }

    #[test]
    fn sine_third_derivative() {
        let t = var(0.3, 0, 1);
        let s = t.sin();
        assert!((s.d1(0) - 0.3f64.cos()).abs() < 1e-15);
        assert!((s.d2(0, 0) + 0.3f64.sin()).abs() < 1e-15);
        assert!((s.d3(0, 0, 0) + 0.3f64.cos()).abs() < 1e-15);
    }

    #[test]
    fn quotient_and_log() {
        let x = var(2.0, 0, 1);
        let q = Dual::cst(1.0) / x.clone();
        assert!((q.d1(0) + 0.25).abs() < 1e-15);
        assert!((q.d2(0, 0) - 0.25).abs() < 1e-15);
        assert!((q.d3(0, 0, 0) + 6.0 / 16.0).abs() < 1e-15);
        let l = x.ln();
        assert!((l.d3(0, 0, 0) - 2.0 / 8.0).abs() < 1e-15);
        let r = x.sqrt();
        let s2 = 2f64.sqrt();
        assert!((r.d1(0) - 0.5 / s2).abs() < 1e-15);
        assert!((r.d2(0, 0) + 0.25 / (2.0 * s2)).abs() < 1e-15);
        assert!((r.d3(0, 0, 0) - 0.375 / (4.0 * s2)).abs() < 1e-15);
    }

    #[test]
    fn integer_power_at_zero_is_finite() {
        let x = var(0.0, 0, 1);
        let p = x.powi(2);
        assert_eq!(p.d2(0, 0), 2.0);
        assert_eq!(p.d3(0, 0, 0), 0.0);
    }

    #[test]
    fn nested_duals_give_second_derivatives() {
        // f(x) = x^3 at x = 2: inner level differentiates, outer level differentiates the result.
        let outer = Dual::<f64>::variable(2.0, 0, 1, 1);
        let inner = Dual::<Dual<f64>>::variable(outer, 0, 1, 1);
        let f = inner.powi(3);
        let df = f.d1(0);
        assert!((df.value() - 12.0).abs() < 1e-14);
        assert!((df.d1(0) - 12.0).abs() < 1e-14);
    }
}
