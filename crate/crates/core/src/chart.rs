//! Coordinate charts, field evaluation, differentiation and quadrature.
//!
//! A [`ChartDomain`] is a coordinate box with optional per-axis periodicity.
//! Fields implement [`VectorFn`], whose `eval` is generic over [`Scalar`];
//! [`jets`] differentiates any such field either by forward-mode dual numbers
//! or by fourth-order central differences.

use serde::{Deserialize, Serialize};

use crate::dual::Dual;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::linalg::Mat;
use crate::scalar::{re_vec, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
    periodic: Vec<bool>,
    grid_res: Vec<usize>,
}

impl ChartDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, periodic: Vec<bool>, grid_res: Vec<usize>) -> Result<Self> {
        let n = lo.len();
        if n < 2 {
            return Err(Error::InvalidChart(format!("dimension {n} < 2")));
        }
        if hi.len() != n || periodic.len() != n || grid_res.len() != n {
            return Err(Error::InvalidChart("per-axis arrays have different lengths".into()));
        }
        for i in 0..n {
            if !(lo[i] < hi[i]) {
                return Err(Error::InvalidChart(format!("axis {i}: lo {} >= hi {}", lo[i], hi[i])));
            }
            if grid_res[i] < 4 {
                return Err(Error::InvalidChart(format!("axis {i}: grid resolution {} < 4", grid_res[i])));
            }
        }
        Ok(ChartDomain { lo, hi, periodic, grid_res })
    }

    /// Symmetric box `[-half, half]^n`, non-periodic.
    pub fn cube(n: usize, half: f64, res: usize) -> Result<Self> {
        Self::new(vec![-half; n], vec![half; n], vec![false; n], vec![res; n])
    }

    /// Fully periodic box `[0, period]^n`.
    pub fn torus(n: usize, period: f64, res: usize) -> Result<Self> {
        Self::new(vec![0.0; n], vec![period; n], vec![true; n], vec![res; n])
    }

    /// Cartesian product of charts (coordinates concatenated).
    pub fn product(parts: &[&ChartDomain]) -> Self {
        let mut out = ChartDomain { lo: vec![], hi: vec![], periodic: vec![], grid_res: vec![] };
        for p in parts {
            out.lo.extend(&p.lo);
            out.hi.extend(&p.hi);
            out.periodic.extend(&p.periodic);
            out.grid_res.extend(&p.grid_res);
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    pub fn grid_res(&self) -> &[usize] {
        &self.grid_res
    }

    pub fn fully_periodic(&self) -> bool {
        self.periodic.iter().all(|&p| p)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn with_grid_res(mut self, res: usize) -> Self {
        self.grid_res = vec![res.max(4); self.dim()];
        self
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && (0..self.dim()).all(|i| self.periodic[i] || (x[i] >= self.lo[i] && x[i] <= self.hi[i]))
    }

    /// Wrap periodic axes into `[lo, hi)`; error if a non-periodic axis is out of bounds.
    pub fn wrap<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        if x.len() != self.dim() {
            return Err(Error::DomainMismatch(format!("point has {} coordinates, chart {}", x.len(), self.dim())));
        }
        let mut out = Vec::with_capacity(x.len());
        for (i, xi) in x.iter().enumerate() {
            let v = xi.re();
            if !v.is_finite() {
                return Err(Error::OutOfDomain { point: re_vec(x) });
            }
            if self.periodic[i] {
                let len = self.hi[i] - self.lo[i];
                let k = ((v - self.lo[i]) / len).floor();
                out.push(if k == 0.0 { xi.clone() } else { xi.clone() - S::cst(k * len) });
            } else if v < self.lo[i] || v > self.hi[i] {
                return Err(Error::OutOfDomain { point: re_vec(x) });
            } else {
                out.push(xi.clone());
            }
        }
        Ok(out)
    }

    /// Finite-difference steps: 1% of the axis length, clamped to `[1e-4, 1e-1]`.
    pub fn fd_steps(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| ((b - a) * 1e-2).clamp(1e-4, 1e-1)).collect()
    }

    /// Sample grid used by sweeps and quadrature. Periodic axes use the
    /// left-endpoint rule `lo + k·L/res`; other axes use cell centres.
    pub fn grid_points(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let axes: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let r = self.grid_res[i];
                let h = (self.hi[i] - self.lo[i]) / r as f64;
                (0..r)
                    .map(|k| if self.periodic[i] { self.lo[i] + k as f64 * h } else { self.lo[i] + (k as f64 + 0.5) * h })
                    .collect()
            })
            .collect();
        let mut pts = vec![Vec::with_capacity(n)];
        for axis in &axes {
            let mut next = Vec::with_capacity(pts.len() * axis.len());
            for p in &pts {
                for &v in axis {
                    let mut q = p.clone();
                    q.push(v);
                    next.push(q);
                }
            }
            pts = next;
        }
        pts
    }
}

/// Differentiation backend.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Dual,
    Fd,
}

impl std::str::FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dual" => Ok(Backend::Dual),
            "fd" => Ok(Backend::Fd),
            other => Err(format!("unknown backend '{other}' (expected dual|fd)")),
        }
    }
}

/// Differentiation context: backend plus per-axis finite-difference steps.
#[derive(Clone, Debug, PartialEq)]
pub struct Ctx {
    pub backend: Backend,
    pub steps: Vec<f64>,
}

impl Ctx {
    pub fn new(dom: &ChartDomain, backend: Backend) -> Self {
        Ctx { backend, steps: dom.fd_steps() }
    }

    pub fn dual(dom: &ChartDomain) -> Self {
        Self::new(dom, Backend::Dual)
    }

    pub fn fd(dom: &ChartDomain) -> Self {
        Self::new(dom, Backend::Fd)
    }
}

/// A smooth map from chart coordinates to `dim_out` reals, evaluable on any scalar type.
pub trait VectorFn {
    fn dim_out(&self) -> usize;
    fn eval<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>>;
}

/// Value and partial derivatives of one scalar output at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet<S> {
    pub value: S,
    pub d1: Vec<S>,
    /// `n*n` row-major, empty when not requested.
    pub d2: Vec<S>,
    /// `n*n*n`, `None` when not requested.
    pub d3: Option<Vec<S>>,
}

impl<S: Scalar> Jet<S> {
    pub fn n(&self) -> usize {
        self.d1.len()
    }

    pub fn hess(&self, i: usize, j: usize) -> S {
        self.d2[i * self.n() + j].clone()
    }

    pub fn third(&self, i: usize, j: usize, k: usize) -> Option<S> {
        let n = self.n();
        self.d3.as_ref().map(|t| t[(i * n + j) * n + k].clone())
    }

    /// Average `d2` over index swaps and `d3` over all index permutations.
    pub fn symmetrize(&mut self) {
        let n = self.n();
        if !self.d2.is_empty() {
            for i in 0..n {
                for j in i + 1..n {
                    let avg = (self.d2[i * n + j].clone() + self.d2[j * n + i].clone()).scale(0.5);
                    self.d2[i * n + j] = avg.clone();
                    self.d2[j * n + i] = avg;
                }
            }
        }
        if let Some(t) = self.d3.as_mut() {
            let idx = |i: usize, j: usize, k: usize| (i * n + j) * n + k;
            for i in 0..n {
                for j in i..n {
                    for k in j..n {
                        let perms = [idx(i, j, k), idx(i, k, j), idx(j, i, k), idx(j, k, i), idx(k, i, j), idx(k, j, i)];
                        let mut uniq: Vec<usize> = perms.to_vec();
                        uniq.sort_unstable();
                        uniq.dedup();
                        let total = crate::scalar::sum(uniq.iter().map(|&p| t[p].clone()));
                        let avg = total.scale(1.0 / uniq.len() as f64);
                        for p in uniq {
                            t[p] = avg.clone();
                        }
                    }
                }
            }
        }
    }
}

const D1: [(f64, f64); 4] = [(-2.0, 1.0 / 12.0), (-1.0, -8.0 / 12.0), (1.0, 8.0 / 12.0), (2.0, -1.0 / 12.0)];
const D2: [(f64, f64); 5] =
    [(-2.0, -1.0 / 12.0), (-1.0, 16.0 / 12.0), (0.0, -30.0 / 12.0), (1.0, 16.0 / 12.0), (2.0, -1.0 / 12.0)];

fn shifted<S: Scalar>(x: &[S], i: usize, d: f64) -> Vec<S> {
    let mut y = x.to_vec();
    if d != 0.0 {
        y[i] = y[i].clone() + S::cst(d);
    }
    y
}

fn axpy<S: Scalar>(acc: &mut [S], c: f64, v: &[S]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a = a.clone() + b.scale(c);
    }
}

type Eval<'a, S> = dyn Fn(&[S]) -> Result<Vec<S>> + 'a;

fn fd_first<S: Scalar>(f: &Eval<'_, S>, x: &[S], i: usize, h: f64, m: usize) -> Result<Vec<S>> {
    let mut acc = vec![S::zero(); m];
    for (off, w) in D1 {
        axpy(&mut acc, w / h, &f(&shifted(x, i, off * h))?);
    }
    Ok(acc)
}

fn fd_second<S: Scalar>(f: &Eval<'_, S>, x: &[S], i: usize, j: usize, steps: &[f64], m: usize) -> Result<Vec<S>> {
    if i == j {
        let h = steps[i];
        let mut acc = vec![S::zero(); m];
        for (off, w) in D2 {
            axpy(&mut acc, w / (h * h), &f(&shifted(x, i, off * h))?);
        }
        Ok(acc)
    } else {
        let inner = |y: &[S]| fd_first(f, y, j, steps[j], m);
        fd_first(&inner, x, i, steps[i], m)
    }
}

/// Value and derivatives up to `order` (1..=3) of every output of `f` at `x`.
pub fn jets<S: Scalar, F: VectorFn + ?Sized>(f: &F, x: &[S], order: usize, ctx: &Ctx) -> Result<Vec<Jet<S>>> {
    if !(1..=3).contains(&order) {
        return Err(Error::OrderUnsupported(order));
    }
    let n = x.len();
    let m = f.dim_out();
    let mut out: Vec<Jet<S>> = match ctx.backend {
        Backend::Dual => {
            let seeds: Vec<Dual<S>> =
                x.iter().enumerate().map(|(i, xi)| Dual::variable(xi.clone(), i, n, order as u8)).collect();
            let vals = f.eval(&seeds)?;
            vals.into_iter()
                .map(|d| Jet {
                    value: d.value().clone(),
                    d1: (0..n).map(|i| d.d1(i)).collect(),
                    d2: if order >= 2 {
                        (0..n * n).map(|k| d.d2(k / n, k % n)).collect()
                    } else {
                        Vec::new()
                    },
                    d3: (order >= 3).then(|| (0..n * n * n).map(|k| d.d3(k / (n * n), (k / n) % n, k % n)).collect()),
                })
                .collect()
        }
        Backend::Fd => {
            if ctx.steps.len() != n {
                return Err(Error::DomainMismatch("finite-difference steps do not match point dimension".into()));
            }
            let eval = |y: &[S]| f.eval(y);
            let value = eval(x)?;
            let mut d1 = vec![vec![S::zero(); n]; m];
            for i in 0..n {
                let col = fd_first(&eval, x, i, ctx.steps[i], m)?;
                for (o, v) in col.into_iter().enumerate() {
                    d1[o][i] = v;
                }
            }
            let mut d2 = vec![Vec::new(); m];
            if order >= 2 {
                for row in d2.iter_mut() {
                    *row = vec![S::zero(); n * n];
                }
                for i in 0..n {
                    for j in i..n {
                        let col = fd_second(&eval, x, i, j, &ctx.steps, m)?;
                        for (o, v) in col.into_iter().enumerate() {
                            d2[o][i * n + j] = v.clone();
                            d2[o][j * n + i] = v;
                        }
                    }
                }
            }
            let mut d3: Vec<Option<Vec<S>>> = vec![None; m];
            if order >= 3 {
                let mut t = vec![vec![S::zero(); n * n * n]; m];
                for i in 0..n {
                    for j in i..n {
                        for k in j..n {
                            let second = |y: &[S]| fd_second(&eval, y, i, j, &ctx.steps, m);
                            let col = fd_first(&second, x, k, ctx.steps[k], m)?;
                            for (o, v) in col.into_iter().enumerate() {
                                for (a, b, c) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
                                    t[o][(a * n + b) * n + c] = v.clone();
                                }
                            }
                        }
                    }
                }
                d3 = t.into_iter().map(Some).collect();
            }
            value
                .into_iter()
                .zip(d1)
                .zip(d2)
                .zip(d3)
                .map(|(((value, d1), d2), d3)| Jet { value, d1, d2, d3 })
                .collect()
        }
    };
    for j in out.iter_mut() {
        j.symmetrize();
    }
    Ok(out)
}

/// A scalar field given by an expression in chart coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub expr: Expr,
    /// Declared smoothness order (at least 3).
    pub smoothness: usize,
}

impl ScalarField {
    pub fn new(expr: Expr) -> Self {
        ScalarField { expr, smoothness: 3 }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(Expr::c(c))
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.expr.eval(x)
    }
}

impl From<Expr> for ScalarField {
    fn from(e: Expr) -> Self {
        ScalarField::new(e)
    }
}

impl VectorFn for ScalarField {
    fn dim_out(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        Ok(vec![self.expr.eval(x)])
    }
}

/// A list of expressions evaluated together.
#[derive(Clone, Debug, PartialEq)]
pub struct ExprVec(pub Vec<Expr>);

impl VectorFn for ExprVec {
    fn dim_out(&self) -> usize {
        self.0.len()
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        Ok(self.0.iter().map(|e| e.eval(x)).collect())
    }
}

/// Checked jet evaluation at a chart point: wraps periodic axes and rejects
/// points outside the box or orders beyond the declared smoothness.
pub fn eval_jet<F: VectorFn>(
    field: &F,
    dom: &ChartDomain,
    x: &[f64],
    order: usize,
    backend: Backend,
    smoothness: usize,
) -> Result<Vec<Jet<f64>>> {
    if order == 0 || order > 3 || order > smoothness {
        return Err(Error::OrderUnsupported(order));
    }
    let x = dom.wrap(x)?;
    jets(field, &x, order, &Ctx::new(dom, backend))
}

/// Result of chart quadrature. `certified` is false when some axis is not
/// periodic, in which case the trapezoidal value carries boundary error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub certified: bool,
}

/// Trapezoidal quadrature of `field·density` over the chart box.
pub fn integrate_chart(
    dom: &ChartDomain,
    field: &dyn Fn(&[f64]) -> Result<f64>,
    density: &dyn Fn(&[f64]) -> Result<f64>,
) -> Result<Quadrature> {
    let n = dom.dim();
    let axes: Vec<Vec<(f64, f64)>> = (0..n)
        .map(|i| {
            let (lo, hi, r) = (dom.lo[i], dom.hi[i], dom.grid_res[i]);
            if dom.periodic[i] {
                let h = (hi - lo) / r as f64;
                (0..r).map(|k| (lo + k as f64 * h, h)).collect()
            } else {
                let h = (hi - lo) / (r - 1) as f64;
                (0..r).map(|k| (lo + k as f64 * h, if k == 0 || k == r - 1 { 0.5 * h } else { h })).collect()
            }
        })
        .collect();
    let mut total = 0.0;
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    'outer: loop {
        let mut w = 1.0;
        for i in 0..n {
            x[i] = axes[i][idx[i]].0;
            w *= axes[i][idx[i]].1;
        }
        let d = density(&x)?;
        if !(d > 0.0) {
            return Err(Error::NotSpd { pivot: d });
        }
        total += w * field(&x)? * d;
        for i in (0..n).rev() {
            idx[i] += 1;
            if idx[i] < axes[i].len() {
                continue 'outer;
            }
            idx[i] = 0;
        }
        break;
    }
    Ok(Quadrature { value: total, certified: dom.fully_periodic() })
}

/// Gram–Schmidt orthonormalisation of `basis` (columns) with respect to `g`.
/// The result is upper-triangular in the input basis with positive diagonal,
/// so orientation is preserved.
pub fn frame_gram_schmidt<S: Scalar>(g: &Mat<S>, basis: &Mat<S>) -> Result<Mat<S>> {
    let n = basis.cols();
    let mut frame: Vec<Vec<S>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut v = basis.column(j);
        for e in &frame {
            let c = g.bilinear(e, &v);
            for (vi, ei) in v.iter_mut().zip(e) {
                *vi = vi.clone() - c.clone() * ei.clone();
            }
        }
        let nrm2 = g.bilinear(&v, &v);
        if !(nrm2.re() > 1e-300) {
            return Err(Error::NotSpd { pivot: nrm2.re() });
        }
        let inv = S::one() / nrm2.sqrt();
        frame.push(v.into_iter().map(|vi| vi * inv.clone()).collect());
    }
    Ok(Mat::from_columns(&frame))
}

/// Orthonormal frame obtained from the coordinate basis.
pub fn coordinate_frame<S: Scalar>(g: &Mat<S>) -> Result<Mat<S>> {
    frame_gram_schmidt(g, &Mat::identity(g.rows()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn constant_field_has_zero_derivatives() {
        let dom = ChartDomain::cube(2, 1.0, 4).unwrap();
        let f = ScalarField::constant(3.5);
        for backend in [Backend::Dual, Backend::Fd] {
            let j = &eval_jet(&f, &dom, &[0.2, -0.4], 2, backend, 3).unwrap()[0];
            assert_eq!(j.value, 3.5);
            assert!(j.d1.iter().all(|v| v.abs() < 1e-12));
            assert!(j.d2.iter().all(|v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn bilinear_field_exact() {
        let dom = ChartDomain::cube(2, 3.0, 4).unwrap();
        let f = ScalarField::new(parse("x*y", &names(&["x", "y"])).unwrap());
        let j = &eval_jet(&f, &dom, &[1.0, 2.0], 2, Backend::Dual, 3).unwrap()[0];
        assert_eq!(j.d1, vec![2.0, 1.0]);
        assert_eq!(j.hess(0, 1), 1.0);
        assert_eq!(j.hess(1, 0), 1.0);
        assert_eq!(j.hess(0, 0), 0.0);
    }

    #[test]
    fn sine_backends_agree() {
        let dom = ChartDomain::cube(2, 1.0, 4).unwrap();
        let f = ScalarField::new(parse("sin(t)", &names(&["t", "s"])).unwrap());
        let a = &eval_jet(&f, &dom, &[0.3, 0.0], 2, Backend::Dual, 3).unwrap()[0];
        let b = &eval_jet(&f, &dom, &[0.3, 0.0], 2, Backend::Fd, 3).unwrap()[0];
        assert!((a.d1[0] - b.d1[0]).abs() < 1e-8);
        assert!((a.hess(0, 0) - b.hess(0, 0)).abs() < 1e-8);
    }

    #[test]
    fn out_of_domain_and_order_errors() {
        let dom = ChartDomain::cube(2, 1.0, 4).unwrap();
        let f = ScalarField::constant(1.0);
        assert!(matches!(eval_jet(&f, &dom, &[1.5, 0.0], 1, Backend::Dual, 3), Err(Error::OutOfDomain { .. })));
        assert!(matches!(eval_jet(&f, &dom, &[0.0, 0.0], 4, Backend::Dual, 3), Err(Error::OrderUnsupported(4))));
        let tor = ChartDomain::torus(2, 1.0, 8).unwrap();
        assert!(eval_jet(&f, &tor, &[1.5, -3.2], 1, Backend::Dual, 3).is_ok());
    }

    #[test]
    fn periodic_quadrature() {
        let tor = ChartDomain::torus(2, 1.0, 16).unwrap();
        let one = |_: &[f64]| Ok(1.0);
        let v = integrate_chart(&tor, &one, &one).unwrap();
        assert!((v.value - 1.0).abs() < 1e-14 && v.certified);
        let s = |x: &[f64]| Ok((2.0 * std::f64::consts::PI * x[0]).sin());
        assert!(integrate_chart(&tor, &s, &one).unwrap().value.abs() < 1e-12);
        let boxed = ChartDomain::cube(2, 1.0, 8).unwrap();
        assert!(!integrate_chart(&boxed, &one, &one).unwrap().certified);
    }

    #[test]
    fn gram_schmidt_diagonal() {
        let g = Mat::from_vec(2, 2, vec![4.0, 0.0, 0.0, 9.0]);
        let e = coordinate_frame(&g).unwrap();
        assert_eq!(e, Mat::from_vec(2, 2, vec![0.5, 0.0, 0.0, 1.0 / 3.0]));
        let bad = Mat::from_vec(2, 2, vec![1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(coordinate_frame(&bad), Err(Error::NotSpd { .. })));
    }

    #[test]
    fn grid_sizes() {
        let dom = ChartDomain::cube(3, 1.0, 4).unwrap();
        assert_eq!(dom.grid_points().len(), 64);
        assert!(ChartDomain::new(vec![0.0, 0.0], vec![1.0, 0.0], vec![false; 2], vec![4; 2]).is_err());
        assert!(ChartDomain::new(vec![0.0, 0.0], vec![1.0, 1.0], vec![false; 2], vec![3, 4]).is_err());
    }
}
