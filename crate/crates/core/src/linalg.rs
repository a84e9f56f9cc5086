//! Small dense matrices over a generic [`Scalar`], plus a few `f64`-only
//! helpers backed by nalgebra (spectral norm, matrix logarithm).

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S> Index<(usize, usize)> for Mat<S> {
    type Output = S;
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S> IndexMut<(usize, usize)> for Mat<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}

impl<S: Scalar> Mat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vec<S>]) -> Self {
        let rows = cols.first().map_or(0, Vec::len);
        Self::from_fn(rows, cols.len(), |i, j| cols[j][i].clone())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<S> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].clone())
    }

    pub fn mul(&self, other: &Mat<S>) -> Self {
        assert_eq!(self.cols, other.rows);
        Self::from_fn(self.rows, other.cols, |i, j| {
            crate::scalar::sum((0..self.cols).map(|k| self[(i, k)].clone() * other[(k, j)].clone()))
        })
    }

    pub fn mul_vec(&self, v: &[S]) -> Vec<S> {
        (0..self.rows)
            .map(|i| crate::scalar::sum((0..self.cols).map(|k| self[(i, k)].clone() * v[k].clone())))
            .collect()
    }

    pub fn add(&self, other: &Mat<S>) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)].clone() + other[(i, j)].clone())
    }

    pub fn sub(&self, other: &Mat<S>) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)].clone() - other[(i, j)].clone())
    }

    pub fn scale_by(&self, c: &S) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)].clone() * c.clone())
    }

    /// `vᵀ M w`.
    pub fn bilinear(&self, v: &[S], w: &[S]) -> S {
        crate::scalar::sum((0..self.rows).flat_map(|i| {
            (0..self.cols).map(move |j| v[i].clone() * self[(i, j)].clone() * w[j].clone())
        }))
    }

    pub fn trace(&self) -> S {
        crate::scalar::sum((0..self.rows.min(self.cols)).map(|i| self[(i, i)].clone()))
    }

    /// Gauss–Jordan inverse with partial pivoting on the real parts.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.rows;
        assert_eq!(n, self.cols);
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let (piv, best) = (col..n)
                .map(|r| (r, a[(r, col)].re().abs()))
                .fold((col, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
            if best < 1e-300 || !best.is_finite() {
                return Err(Error::NotSpd { pivot: best });
            }
            if piv != col {
                for j in 0..n {
                    a.data.swap(piv * n + j, col * n + j);
                    inv.data.swap(piv * n + j, col * n + j);
                }
            }
            let p = a[(col, col)].clone();
            for j in 0..n {
                a[(col, j)] = a[(col, j)].clone() / p.clone();
                inv[(col, j)] = inv[(col, j)].clone() / p.clone();
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[(r, col)].clone();
                for j in 0..n {
                    a[(r, j)] = a[(r, j)].clone() - f.clone() * a[(col, j)].clone();
                    inv[(r, j)] = inv[(r, j)].clone() - f.clone() * inv[(col, j)].clone();
                }
            }
        }
        Ok(inv)
    }

    /// Determinant. Cofactor expansion for small sizes (exact for every
    /// scalar type, including duals whose value part vanishes), elimination
    /// with partial pivoting otherwise.
    pub fn det(&self) -> S {
        let n = self.rows;
        assert_eq!(n, self.cols);
        match n {
            0 => return S::one(),
            1 => return self[(0, 0)].clone(),
            2 => return self[(0, 0)].clone() * self[(1, 1)].clone() - self[(0, 1)].clone() * self[(1, 0)].clone(),
            3..=5 => {
                return crate::scalar::sum((0..n).map(|j| {
                    let minor = Self::from_fn(n - 1, n - 1, |r, c| self[(r + 1, if c < j { c } else { c + 1 })].clone());
                    let term = self[(0, j)].clone() * minor.det();
                    if j % 2 == 0 { term } else { -term }
                }))
            }
            _ => {}
        }
        let mut a = self.clone();
        let mut det = S::one();
        for col in 0..n {
            let (piv, best) = (col..n)
                .map(|r| (r, a[(r, col)].re().abs()))
                .fold((col, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
            if best == 0.0 {
                return S::zero();
            }
            if piv != col {
                for j in 0..n {
                    a.data.swap(piv * n + j, col * n + j);
                }
                det = -det;
            }
            let p = a[(col, col)].clone();
            det = det * p.clone();
            for r in col + 1..n {
                let f = a[(r, col)].clone() / p.clone();
                for j in col..n {
                    a[(r, j)] = a[(r, j)].clone() - f.clone() * a[(col, j)].clone();
                }
            }
        }
        det
    }

    /// Cholesky factor `L` with `M = L Lᵀ`; fails with `NotSpd` on a non-positive pivot.
    pub fn cholesky(&self) -> Result<Self> {
        let n = self.rows;
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)].clone();
            for k in 0..j {
                d = d - l[(j, k)].clone() * l[(j, k)].clone();
            }
            if !(d.re() > 0.0) {
                return Err(Error::NotSpd { pivot: d.re() });
            }
            let djj = d.sqrt();
            l[(j, j)] = djj.clone();
            for i in j + 1..n {
                let mut s = self[(i, j)].clone();
                for k in 0..j {
                    s = s - l[(i, k)].clone() * l[(j, k)].clone();
                }
                l[(i, j)] = s / djj.clone();
            }
        }
        Ok(l)
    }

    pub fn to_f64(&self) -> Mat<f64> {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(Scalar::re).collect() }
    }

    pub fn map<T>(&self, f: impl Fn(&S) -> T) -> Mat<T> {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }
}

impl Mat<f64> {
    pub fn to_na(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_na(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Spectral (operator 2-) norm.
    pub fn op_norm(&self) -> f64 {
        op_norm(&self.to_na())
    }
}

pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().fold(0.0, |a: f64, v| a.max(*v))
}

/// Principal logarithm of a real matrix whose spectrum avoids the closed
/// negative half-line, by inverse scaling and squaring.
pub fn logm(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let mut y = a.clone();
    let mut squarings = 0;
    while (&y - &id).norm() > 0.05 {
        y = sqrtm_db(&y)?;
        squarings += 1;
        if squarings > 40 {
            return None;
        }
    }
    let x = &y - &id;
    // log(I + X) = X - X²/2 + X³/3 - ...
    let mut term = x.clone();
    let mut out = x.clone();
    for k in 2..60 {
        term = &term * &x;
        let contrib = &term * (if k % 2 == 0 { -1.0 } else { 1.0 } / k as f64);
        out += &contrib;
        if contrib.norm() < 1e-18 {
            break;
        }
    }
    Some(out * 2f64.powi(squarings))
}

/// Denman–Beavers square root iteration.
fn sqrtm_db(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::<f64>::identity(n, n);
    for _ in 0..100 {
        let yi = y.clone().try_inverse()?;
        let zi = z.clone().try_inverse()?;
        let y_next = (&y + &zi) * 0.5;
        let z_next = (&z + &yi) * 0.5;
        let delta = (&y_next - &y).norm();
        y = y_next;
        z = z_next;
        if delta < 1e-15 * y.norm().max(1.0) {
            return Some(y);
        }
    }
    Some(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_and_det() {
        let m = Mat::from_vec(3, 3, vec![4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let inv = m.inverse().unwrap();
        let id = m.mul(&inv);
        assert!(id.sub(&Mat::identity(3)).max_abs() < 1e-14);
        let d = m.det();
        let want = m.to_na().determinant();
        assert!((d - want).abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = Mat::from_vec(2, 2, vec![1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(m.cholesky(), Err(Error::NotSpd { .. })));
    }

    #[test]
    fn log_of_rotation() {
        let th: f64 = 0.7;
        let r = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        let l = logm(&r).unwrap();
        assert!((l[(1, 0)] - th).abs() < 1e-13);
        assert!((l[(0, 1)] + th).abs() < 1e-13);
        assert!(l[(0, 0)].abs() < 1e-13);
    }
}
