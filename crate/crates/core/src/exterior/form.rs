//! Pointwise exterior algebra on coordinate components.
//!
//! A p-form on an n-dimensional space stores one coefficient per strictly
//! increasing multi-index, in lexicographic order.

use crate::chart::coordinate_frame;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;

/// Binomial coefficient.
pub fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// All strictly increasing `p`-tuples from `0..n`, lexicographically.
pub fn multi_indices(n: usize, p: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(binom(n, p));
    let mut cur: Vec<usize> = (0..p).collect();
    if p > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut k = p;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            if cur[k] < n - p + k {
                cur[k] += 1;
                for j in k + 1..p {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Lexicographic rank of a strictly increasing tuple.
pub fn rank_of(n: usize, idx: &[usize]) -> usize {
    let p = idx.len();
    let mut r = 0;
    let mut prev = 0;
    for (k, &c) in idx.iter().enumerate() {
        for j in prev..c {
            r += binom(n - j - 1, p - k - 1);
        }
        prev = c + 1;
    }
    r
}

/// Sort an index list, returning the permutation sign, or `None` on a repeated index.
pub fn sort_sign(idx: &[usize]) -> Option<(Vec<usize>, f64)> {
    let mut v = idx.to_vec();
    let mut sign = 1.0;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some((v, sign))
    }
}

/// A p-form at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Form<S> {
    n: usize,
    p: usize,
    c: Vec<S>,
}

impl<S: Scalar> Form<S> {
    pub fn zero(n: usize, p: usize) -> Self {
        Form { n, p, c: vec![S::zero(); binom(n, p)] }
    }

    pub fn from_coeffs(n: usize, p: usize, c: Vec<S>) -> Result<Self> {
        if p > n {
            return Err(Error::DegreeOverflow { p, q: 0, n });
        }
        if c.len() != binom(n, p) {
            return Err(Error::DimensionMismatch(format!("{}-form in dimension {n} needs {} coefficients", p, binom(n, p))));
        }
        Ok(Form { n, p, c })
    }

    pub fn scalar(n: usize, v: S) -> Self {
        Form { n, p: 0, c: vec![v] }
    }

    pub fn one_form(c: Vec<S>) -> Self {
        Form { n: c.len(), p: 1, c }
    }

    /// `dx^{i_1} ∧ … ∧ dx^{i_p}` for an arbitrary index list.
    pub fn basis(n: usize, idx: &[usize]) -> Self {
        let mut f = Self::zero(n, idx.len());
        if let Some((sorted, sign)) = sort_sign(idx) {
            f.c[rank_of(n, &sorted)] = S::cst(sign);
        }
        f
    }

    /// Volume form `dx^0 ∧ … ∧ dx^{n-1}` scaled by `v`.
    pub fn top(n: usize, v: S) -> Self {
        Form { n, p: n, c: vec![v] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn coeffs(&self) -> &[S] {
        &self.c
    }

    pub fn into_coeffs(self) -> Vec<S> {
        self.c
    }

    /// Component for an arbitrary index list (antisymmetric extension).
    pub fn get(&self, idx: &[usize]) -> S {
        match sort_sign(idx) {
            Some((sorted, sign)) => self.c[rank_of(self.n, &sorted)].scale(sign),
            None => S::zero(),
        }
    }

    fn same_shape(&self, o: &Self) {
        assert!(self.n == o.n && self.p == o.p, "form shapes differ: ({},{}) vs ({},{})", self.n, self.p, o.n, o.p);
    }

    pub fn add(&self, o: &Self) -> Self {
        self.same_shape(o);
        Form { n: self.n, p: self.p, c: self.c.iter().zip(&o.c).map(|(a, b)| a.clone() + b.clone()).collect() }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.same_shape(o);
        Form { n: self.n, p: self.p, c: self.c.iter().zip(&o.c).map(|(a, b)| a.clone() - b.clone()).collect() }
    }

    pub fn mul(&self, s: &S) -> Self {
        Form { n: self.n, p: self.p, c: self.c.iter().map(|a| a.clone() * s.clone()).collect() }
    }

    pub fn scale(&self, s: f64) -> Self {
        Form { n: self.n, p: self.p, c: self.c.iter().map(|a| a.scale(s)).collect() }
    }

    pub fn wedge(&self, o: &Self) -> Result<Self> {
        if self.n != o.n {
            return Err(Error::DimensionMismatch("wedge of forms on different dimensions".into()));
        }
        let q = self.p + o.p;
        if q > self.n {
            return Err(Error::DegreeOverflow { p: self.p, q: o.p, n: self.n });
        }
        let mut out = Self::zero(self.n, q);
        let left = multi_indices(self.n, self.p);
        let right = multi_indices(self.n, o.p);
        for (a, ia) in left.iter().enumerate() {
            for (b, ib) in right.iter().enumerate() {
                let joined: Vec<usize> = ia.iter().chain(ib).copied().collect();
                if let Some((sorted, sign)) = sort_sign(&joined) {
                    let r = rank_of(self.n, &sorted);
                    out.c[r] = out.c[r].clone() + (self.c[a].clone() * o.c[b].clone()).scale(sign);
                }
            }
        }
        Ok(out)
    }

    /// Interior product `X ⌟ ψ`.
    pub fn interior(&self, x: &[S]) -> Result<Self> {
        if self.p == 0 {
            return Err(Error::DegreeUnderflow);
        }
        let mut out = Self::zero(self.n, self.p - 1);
        for (r, j) in multi_indices(self.n, self.p - 1).iter().enumerate() {
            let mut acc = S::zero();
            for (i, xi) in x.iter().enumerate() {
                if j.contains(&i) {
                    continue;
                }
                let mut idx = Vec::with_capacity(self.p);
                idx.push(i);
                idx.extend(j);
                acc = acc + xi.clone() * self.get(&idx);
            }
            out.c[r] = acc;
        }
        Ok(out)
    }

    /// Pullback by a linear map `A`: `(A*ψ)_J = Σ_I det(A[I,J]) ψ_I`.
    pub fn pullback(&self, a: &Mat<S>) -> Self {
        let idx = multi_indices(self.n, self.p);
        let mut out = Self::zero(self.n, self.p);
        for (jr, jj) in idx.iter().enumerate() {
            let mut acc = S::zero();
            for (ir, ii) in idx.iter().enumerate() {
                let minor = Mat::from_fn(self.p, self.p, |r, c| a[(ii[r], jj[c])].clone());
                acc = acc + minor.det() * self.c[ir].clone();
            }
            out.c[jr] = acc;
        }
        out
    }

    /// Hodge star for metric `g` and orientation sign.
    pub fn hodge(&self, g: &Mat<S>, orientation: f64) -> Result<Self> {
        let e = coordinate_frame(g)?;
        let framed = self.pullback(&e);
        let mut starred = Self::zero(self.n, self.n - self.p);
        for (r, a) in multi_indices(self.n, self.p).iter().enumerate() {
            let comp: Vec<usize> = (0..self.n).filter(|i| !a.contains(i)).collect();
            let joined: Vec<usize> = a.iter().chain(&comp).copied().collect();
            let (_, sign) = sort_sign(&joined).expect("complementary indices are distinct");
            starred.c[rank_of(self.n, &comp)] = framed.c[r].scale(sign * orientation);
        }
        Ok(starred.pullback(&e.inverse()?))
    }

    /// Induced inner product `⟨α,β⟩_g` given the inverse metric.
    pub fn inner(&self, o: &Self, ginv: &Mat<S>) -> S {
        self.same_shape(o);
        if self.p == 0 {
            return self.c[0].clone() * o.c[0].clone();
        }
        let idx = multi_indices(self.n, self.p);
        let mut acc = S::zero();
        for (a, ia) in idx.iter().enumerate() {
            for (b, ib) in idx.iter().enumerate() {
                let minor = Mat::from_fn(self.p, self.p, |r, c| ginv[(ia[r], ib[c])].clone());
                acc = acc + self.c[a].clone() * o.c[b].clone() * minor.det();
            }
        }
        acc
    }

    pub fn norm2(&self, ginv: &Mat<S>) -> S {
        self.inner(self, ginv)
    }

    pub fn to_f64(&self) -> Form<f64> {
        Form { n: self.n, p: self.p, c: self.c.iter().map(Scalar::re).collect() }
    }
}

impl Form<f64> {
    pub fn max_abs(&self) -> f64 {
        self.c.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `|ψ|_g`, clamped at zero against round-off.
    pub fn norm(&self, ginv: &Mat<f64>) -> f64 {
        self.norm2(ginv).max(0.0).sqrt()
    }
}

/// `X♭ = g(X, ·)`.
pub fn flat<S: Scalar>(g: &Mat<S>, x: &[S]) -> Form<S> {
    Form::one_form(g.mul_vec(x))
}

/// `α♯ = g^{-1} α`.
pub fn sharp<S: Scalar>(ginv: &Mat<S>, a: &Form<S>) -> Vec<S> {
    assert_eq!(a.degree(), 1);
    ginv.mul_vec(a.coeffs())
}

/// Action of an endomorphism `A` (with `A^l_k` at `(l,k)`) on forms as a derivation:
/// `(A·ψ)(X_1,…,X_p) = Σ_a ψ(…, A X_a, …)`.
pub fn derivation<S: Scalar>(a: &Mat<S>, psi: &Form<S>) -> Result<Form<S>> {
    let n = psi.dim();
    let mut out = Form::zero(n, psi.degree());
    if psi.degree() == 0 {
        return Ok(out);
    }
    for l in 0..n {
        let mut e = vec![S::zero(); n];
        e[l] = S::one();
        let inner = psi.interior(&e)?;
        let row = Form::one_form((0..n).map(|k| a[(l, k)].clone()).collect());
        out = out.add(&row.wedge(&inner)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_bookkeeping() {
        assert_eq!(multi_indices(4, 2).len(), 6);
        for (r, idx) in multi_indices(5, 3).iter().enumerate() {
            assert_eq!(rank_of(5, idx), r);
        }
        assert_eq!(sort_sign(&[2, 0, 1]), Some((vec![0, 1, 2], 1.0)));
        assert_eq!(sort_sign(&[1, 0]), Some((vec![0, 1], -1.0)));
        assert_eq!(sort_sign(&[1, 1]), None);
    }

    #[test]
    fn wedge_and_interior_basics() {
        let dx = Form::<f64>::basis(2, &[0]);
        let dy = Form::<f64>::basis(2, &[1]);
        assert_eq!(dx.wedge(&dx).unwrap().max_abs(), 0.0);
        let vol = dx.wedge(&dy).unwrap();
        assert_eq!(vol.coeffs(), &[1.0]);
        assert_eq!(vol.interior(&[1.0, 0.0]).unwrap(), dy);
        assert_eq!(vol.interior(&[0.0, 1.0]).unwrap(), dx.scale(-1.0));
        assert!(matches!(vol.wedge(&dx), Err(Error::DegreeOverflow { .. })));
        assert!(matches!(Form::scalar(2, 1.0).interior(&[1.0, 0.0]), Err(Error::DegreeUnderflow)));
    }

    #[test]
    fn hodge_in_the_plane() {
        let id = Mat::<f64>::identity(2);
        let dx = Form::<f64>::basis(2, &[0]);
        let dy = Form::<f64>::basis(2, &[1]);
        assert_eq!(dx.hodge(&id, 1.0).unwrap(), dy);
        assert_eq!(dy.hodge(&id, 1.0).unwrap(), dx.scale(-1.0));
        let vol = Form::top(2, 1.0);
        assert_eq!(vol.hodge(&id, 1.0).unwrap().coeffs(), &[1.0]);
    }

    #[test]
    fn derivation_on_one_forms() {
        let a = Mat::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let w = Form::one_form(vec![5.0, 7.0]);
        // (A·w)_k = Σ_l A^l_k w_l
        let got = derivation(&a, &w).unwrap();
        assert_eq!(got.coeffs(), &[1.0 * 5.0 + 3.0 * 7.0, 2.0 * 5.0 + 4.0 * 7.0]);
    }
}
