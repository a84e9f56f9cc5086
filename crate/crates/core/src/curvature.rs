//! Levi-Civita connection and curvature of a metric given by expression components.
//!
//! Conventions: `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z`, lowered as
//! `R_ijkl = g(R(∂_i,∂_j)∂_k, ∂_l)`, `Ric_jk = R^i_{ijk}`. The Laplacian is the
//! positive one, `Δφ = −tr_g ∇dφ`, so `Δ sin x = sin x` on flat space.

use crate::chart::{coordinate_frame, jets, ChartDomain, Ctx, ScalarField, VectorFn};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::linalg::Mat;
use crate::scalar::{lift, Scalar};

/// A Riemannian metric on a chart, `g_ij(x)` given symbolically.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricField {
    dom: ChartDomain,
    comps: Vec<Expr>,
    orientation: f64,
}

impl MetricField {
    /// Build from a full component matrix; the lower triangle is mirrored from the upper.
    pub fn new(dom: ChartDomain, comps: Vec<Vec<Expr>>) -> Result<Self> {
        let n = dom.dim();
        if comps.len() != n || comps.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(format!("metric needs {n}x{n} components")));
        }
        let mut flat = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                flat.push(if i <= j { comps[i][j].clone() } else { comps[j][i].clone() });
            }
        }
        if let Some(v) = flat.iter().filter_map(Expr::max_var).max() {
            if v >= n {
                return Err(Error::DimensionMismatch(format!("metric uses coordinate {v} on a {n}-dimensional chart")));
            }
        }
        Ok(MetricField { dom, comps: flat, orientation: 1.0 })
    }

    pub fn flat(dom: ChartDomain) -> Self {
        let n = dom.dim();
        let comps = (0..n).map(|i| (0..n).map(|j| Expr::c(if i == j { 1.0 } else { 0.0 })).collect()).collect();
        Self::new(dom, comps).expect("flat metric is well formed")
    }

    pub fn diagonal(dom: ChartDomain, diag: Vec<Expr>) -> Result<Self> {
        let n = diag.len();
        let comps = (0..n).map(|i| (0..n).map(|j| if i == j { diag[i].clone() } else { Expr::zero() }).collect()).collect();
        Self::new(dom, comps)
    }

    /// Unit round sphere in polar coordinates `(θ, ϕ)`, `dθ² + sin²θ dϕ²`.
    pub fn round_sphere(dom: ChartDomain) -> Result<Self> {
        if dom.dim() != 2 {
            return Err(Error::DimensionMismatch("round sphere chart is two-dimensional".into()));
        }
        Self::diagonal(dom, vec![Expr::one(), Expr::powi(Expr::sin(Expr::var(0)), 2)])
    }

    /// Block-diagonal metric on the product of the charts of `parts`.
    pub fn product(parts: &[&MetricField]) -> Self {
        let doms: Vec<&ChartDomain> = parts.iter().map(|p| &p.dom).collect();
        let dom = ChartDomain::product(&doms);
        let n = dom.dim();
        let mut comps = vec![vec![Expr::zero(); n]; n];
        let mut off = 0;
        for p in parts {
            let m = p.dim();
            for i in 0..m {
                for j in 0..m {
                    comps[off + i][off + j] = p.comp(i, j).shift_vars(off);
                }
            }
            off += m;
        }
        Self::new(dom, comps).expect("product of valid metrics")
    }

    pub fn dim(&self) -> usize {
        self.dom.dim()
    }

    pub fn dom(&self) -> &ChartDomain {
        &self.dom
    }

    pub fn comp(&self, i: usize, j: usize) -> &Expr {
        &self.comps[i * self.dim() + j]
    }

    pub fn comps(&self) -> Vec<Vec<Expr>> {
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| self.comp(i, j).clone()).collect()).collect()
    }

    pub fn orientation(&self) -> f64 {
        self.orientation
    }

    pub fn with_orientation(mut self, sign: f64) -> Self {
        self.orientation = if sign < 0.0 { -1.0 } else { 1.0 };
        self
    }

    pub fn with_dom(mut self, dom: ChartDomain) -> Result<Self> {
        if dom.dim() != self.dim() {
            return Err(Error::DomainMismatch("chart dimension differs from metric".into()));
        }
        self.dom = dom;
        Ok(self)
    }

    /// `factor · g` with `factor` an expression.
    pub fn scaled(&self, factor: &Expr) -> Self {
        MetricField {
            dom: self.dom.clone(),
            comps: self.comps.iter().map(|c| Expr::mul(factor.clone(), c.clone())).collect(),
            orientation: self.orientation,
        }
    }

    /// `e^{2φ} g`.
    pub fn conformal(&self, phi: &Expr) -> Self {
        self.scaled(&Expr::exp(Expr::scale(2.0, phi.clone())))
    }

    /// Add a perturbation `eps·h` to the component pair `(i,j)` and `(j,i)`.
    pub fn perturbed(&self, i: usize, j: usize, h: Expr) -> Self {
        let n = self.dim();
        let mut out = self.clone();
        out.comps[i * n + j] = Expr::add(out.comps[i * n + j].clone(), h.clone());
        if i != j {
            out.comps[j * n + i] = Expr::add(out.comps[j * n + i].clone(), h);
        }
        out
    }

    pub fn matrix<S: Scalar>(&self, x: &[S]) -> Mat<S> {
        let n = self.dim();
        Mat::from_fn(n, n, |i, j| self.comp(i, j).eval(x))
    }

    pub fn matrix_at(&self, x: &[f64]) -> Result<Mat<f64>> {
        let x = self.dom.wrap(x)?;
        Ok(self.matrix(&x))
    }

    /// Check positive definiteness at every grid point.
    pub fn validate(&self) -> Result<()> {
        for x in self.dom.grid_points() {
            self.matrix(&x).cholesky()?;
        }
        Ok(())
    }

    pub fn ctx(&self, backend: crate::chart::Backend) -> Ctx {
        Ctx::new(&self.dom, backend)
    }
}

impl VectorFn for MetricField {
    fn dim_out(&self) -> usize {
        self.comps.len()
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        Ok(self.comps.iter().map(|c| c.eval(x)).collect())
    }
}

/// Metric, inverse, first derivatives and Christoffel symbols at a point;
/// optionally their derivatives too.
#[derive(Clone, Debug)]
pub struct LocalGeometry<S> {
    pub n: usize,
    pub g: Mat<S>,
    pub ginv: Mat<S>,
    /// `dg[m]` is `∂_m g`.
    pub dg: Vec<Mat<S>>,
    /// `Γ^k_ij` stored at `(k*n + i)*n + j`.
    gamma: Vec<S>,
    /// `∂_m Γ^k_ij` stored at `((m*n + k)*n + i)*n + j`.
    dgamma: Option<Vec<S>>,
}

impl<S: Scalar> LocalGeometry<S> {
    /// `order = 1` gives Γ; `order = 2` also gives ∂Γ (needed for curvature).
    pub fn at(metric: &MetricField, x: &[S], order: usize, ctx: &Ctx) -> Result<Self> {
        let n = metric.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch(format!("point has {} coordinates, metric {n}", x.len())));
        }
        let js = jets(metric, x, order, ctx)?;
        let g = Mat::from_fn(n, n, |i, j| js[i * n + j].value.clone());
        g.to_f64().cholesky()?;
        let ginv = g.inverse()?;
        let dg: Vec<Mat<S>> = (0..n).map(|m| Mat::from_fn(n, n, |i, j| js[i * n + j].d1[m].clone())).collect();
        // Christoffel symbols of the first kind, Γ_lij.
        let first = |l: usize, i: usize, j: usize| {
            (dg[i][(j, l)].clone() + dg[j][(i, l)].clone() - dg[l][(i, j)].clone()).scale(0.5)
        };
        let mut gl = Vec::with_capacity(n * n * n);
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    gl.push(first(l, i, j));
                }
            }
        }
        let mut gamma = vec![S::zero(); n * n * n];
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let v = crate::scalar::sum((0..n).map(|l| ginv[(k, l)].clone() * gl[(l * n + i) * n + j].clone()));
                    gamma[(k * n + i) * n + j] = v.clone();
                    gamma[(k * n + j) * n + i] = v;
                }
            }
        }
        let dgamma = if order >= 2 {
            let mut out = vec![S::zero(); n * n * n * n];
            for m in 0..n {
                // ∂_m g^{kl} = −g^{ka} ∂_m g_ab g^{bl}
                let dginv = ginv.mul(&dg[m]).mul(&ginv).scale_by(&S::cst(-1.0));
                let d2 = |a: usize, b: usize, c: usize| js[a * n + b].hess(c, m);
                for k in 0..n {
                    for i in 0..n {
                        for j in i..n {
                            let v = crate::scalar::sum((0..n).map(|l| {
                                let dfirst = (d2(j, l, i) + d2(i, l, j) - d2(i, j, l)).scale(0.5);
                                dginv[(k, l)].clone() * gl[(l * n + i) * n + j].clone() + ginv[(k, l)].clone() * dfirst
                            }));
                            out[((m * n + k) * n + i) * n + j] = v.clone();
                            out[((m * n + k) * n + j) * n + i] = v;
                        }
                    }
                }
            }
            Some(out)
        } else {
            None
        };
        Ok(LocalGeometry { n, g, ginv, dg, gamma, dgamma })
    }

    pub fn gamma(&self, k: usize, i: usize, j: usize) -> S {
        self.gamma[(k * self.n + i) * self.n + j].clone()
    }

    /// `Γ(v)` as a matrix: `(Γ(v))^k_j = Γ^k_ij v^i`.
    pub fn gamma_along(&self, v: &[S]) -> Mat<S> {
        let n = self.n;
        Mat::from_fn(n, n, |k, j| crate::scalar::sum((0..n).map(|i| self.gamma(k, i, j) * v[i].clone())))
    }

    pub fn dgamma(&self, m: usize, k: usize, i: usize, j: usize) -> Result<S> {
        let n = self.n;
        self.dgamma
            .as_ref()
            .map(|d| d[((m * n + k) * n + i) * n + j].clone())
            .ok_or_else(|| Error::DerivativeFailure("connection derivatives were not computed".into()))
    }

    pub fn flat(&self, v: &[S]) -> Vec<S> {
        self.g.mul_vec(v)
    }

    pub fn sharp(&self, w: &[S]) -> Vec<S> {
        self.ginv.mul_vec(w)
    }

    /// Orthonormal frame from Gram–Schmidt on the coordinate basis (columns).
    pub fn frame(&self) -> Result<Mat<S>> {
        coordinate_frame(&self.g)
    }
}

/// Christoffel symbols `Γ^k_ij` at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionCoefficients {
    pub n: usize,
    pub gamma: Vec<f64>,
}

impl ConnectionCoefficients {
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.gamma[(k * self.n + i) * self.n + j]
    }
}

pub fn christoffel(metric: &MetricField, x: &[f64], ctx: &Ctx) -> Result<ConnectionCoefficients> {
    let x = metric.dom().wrap(x)?;
    let geo = LocalGeometry::at(metric, &x, 1, ctx)?;
    Ok(ConnectionCoefficients { n: geo.n, gamma: geo.gamma })
}

/// Riemann, Ricci, scalar and trace-free Ricci curvature at a point.
#[derive(Clone, Debug)]
pub struct CurvatureBundle<S> {
    pub n: usize,
    /// `R_ijkl` at `((i*n + j)*n + k)*n + l`.
    pub riemann: Vec<S>,
    pub ricci: Mat<S>,
    pub scal: S,
    pub ric0: Mat<S>,
}

impl<S: Scalar> CurvatureBundle<S> {
    pub fn from_geometry(geo: &LocalGeometry<S>) -> Result<Self> {
        let n = geo.n;
        // R^l_ijk
        let mut up = vec![S::zero(); n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut v = geo.dgamma(i, l, j, k)? - geo.dgamma(j, l, i, k)?;
                        for m in 0..n {
                            v = v + geo.gamma(m, j, k) * geo.gamma(l, i, m) - geo.gamma(m, i, k) * geo.gamma(l, j, m);
                        }
                        up[((l * n + i) * n + j) * n + k] = v;
                    }
                }
            }
        }
        let riemann: Vec<S> = (0..n * n * n * n)
            .map(|idx| {
                let (i, j, k, l) = (idx / (n * n * n), (idx / (n * n)) % n, (idx / n) % n, idx % n);
                crate::scalar::sum((0..n).map(|m| geo.g[(l, m)].clone() * up[((m * n + i) * n + j) * n + k].clone()))
            })
            .collect();
        let ricci = Mat::from_fn(n, n, |j, k| crate::scalar::sum((0..n).map(|i| up[((i * n + i) * n + j) * n + k].clone())));
        let ricci = Mat::from_fn(n, n, |j, k| (ricci[(j, k)].clone() + ricci[(k, j)].clone()).scale(0.5));
        let scal = geo.ginv.mul(&ricci).trace();
        let ric0 = ricci.sub(&geo.g.scale_by(&(scal.clone() / S::cst(n as f64))));
        Ok(CurvatureBundle { n, riemann, ricci, scal, ric0 })
    }

    pub fn r(&self, i: usize, j: usize, k: usize, l: usize) -> S {
        let n = self.n;
        self.riemann[((i * n + j) * n + k) * n + l].clone()
    }
}

impl CurvatureBundle<f64> {
    /// Largest violation among antisymmetry, pair symmetry and the first Bianchi identity.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let r = self.r(i, j, k, l);
                        worst = worst
                            .max((r + self.r(j, i, k, l)).abs())
                            .max((r + self.r(i, j, l, k)).abs())
                            .max((r - self.r(k, l, i, j)).abs())
                            .max((r + self.r(i, k, l, j) + self.r(i, l, j, k)).abs());
                    }
                }
            }
        }
        worst
    }

    /// `g^{ij} Ric0_ij`.
    pub fn ric0_trace(&self, ginv: &Mat<f64>) -> f64 {
        ginv.mul(&self.ric0).trace()
    }
}

pub fn curvature_pack(metric: &MetricField, x: &[f64], ctx: &Ctx) -> Result<CurvatureBundle<f64>> {
    let x = metric.dom().wrap(x)?;
    let geo = LocalGeometry::at(metric, &x, 2, ctx)?;
    CurvatureBundle::from_geometry(&geo)
}

/// Gradient, squared norm of the differential and Laplacian of a scalar field.
#[derive(Clone, Debug)]
pub struct GradLaplace<S> {
    pub grad: Vec<S>,
    pub dphi: Vec<S>,
    pub norm2: S,
    pub laplacian: S,
    /// `∇dφ` as a symmetric matrix.
    pub hessian: Mat<S>,
}

pub fn grad_laplace_with<S: Scalar>(geo: &LocalGeometry<S>, phi: &ScalarField, x: &[S], ctx: &Ctx) -> Result<GradLaplace<S>> {
    let n = geo.n;
    let j = jets(phi, x, 2, ctx)?.remove(0);
    let dphi = j.d1.clone();
    let grad = geo.sharp(&dphi);
    let norm2 = crate::scalar::sum(grad.iter().zip(&dphi).map(|(a, b)| a.clone() * b.clone()));
    let hessian = Mat::from_fn(n, n, |a, b| {
        j.hess(a, b) - crate::scalar::sum((0..n).map(|k| geo.gamma(k, a, b) * dphi[k].clone()))
    });
    let laplacian = -geo.ginv.mul(&hessian).trace();
    Ok(GradLaplace { grad, dphi, norm2, laplacian, hessian })
}

pub fn grad_laplace(metric: &MetricField, phi: &ScalarField, x: &[f64], ctx: &Ctx) -> Result<GradLaplace<f64>> {
    let x = metric.dom().wrap(x)?;
    let geo = LocalGeometry::at(metric, &x, 1, ctx)?;
    grad_laplace_with(&geo, phi, &x, ctx)
}

/// Coefficient of the Riemannian volume form, `orientation · √det g`.
pub fn volume_density(metric: &MetricField, x: &[f64]) -> Result<f64> {
    let g = metric.matrix_at(x)?;
    let l = g.cholesky()?;
    let det: f64 = (0..g.rows()).map(|i| l[(i, i)]).product::<f64>().powi(2);
    Ok(metric.orientation() * det.sqrt())
}

/// `|V|²_g` for a vector at `x`.
pub fn vector_norm2<S: Scalar>(g: &Mat<S>, v: &[S]) -> S {
    g.bilinear(v, v)
}

/// Helper for callers holding plain points.
pub fn geometry_at(metric: &MetricField, x: &[f64], order: usize, ctx: &Ctx) -> Result<LocalGeometry<f64>> {
    let x = metric.dom().wrap(x)?;
    LocalGeometry::at(metric, &lift::<f64>(&x), order, ctx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Backend;

    #[test]
    fn sphere_scalar_curvature_is_two() {
        let dom = ChartDomain::new(vec![0.3, -1.0], vec![2.8, 1.0], vec![false, true], vec![4, 4]).unwrap();
        let s2 = MetricField::round_sphere(dom).unwrap();
        for backend in [Backend::Dual, Backend::Fd] {
            let ctx = s2.ctx(backend);
            let cb = curvature_pack(&s2, &[1.1, 0.2], &ctx).unwrap();
            assert!((cb.scal - 2.0).abs() < 1e-6, "{:?} {}", backend, cb.scal);
            let g = s2.matrix(&[1.1, 0.2]);
            assert!(cb.ricci.sub(&g).max_abs() < 1e-6);
            assert!(cb.symmetry_defect() < 1e-8);
            let gam = christoffel(&s2, &[1.1, 0.2], &ctx).unwrap();
            let tol = if backend == Backend::Dual { 1e-12 } else { 1e-6 };
            assert!((gam.get(0, 1, 1) + 1.1f64.sin() * 1.1f64.cos()).abs() < tol);
        }
    }

    #[test]
    fn laplacian_sign() {
        let dom = ChartDomain::cube(2, 2.0, 4).unwrap();
        let flat = MetricField::flat(dom);
        let phi = ScalarField::new(Expr::powi(Expr::var(0), 2));
        let gl = grad_laplace(&flat, &phi, &[0.5, 0.1], &flat.ctx(Backend::Dual)).unwrap();
        assert_eq!(gl.laplacian, -2.0);
        assert_eq!(gl.grad, vec![1.0, 0.0]);
    }

    #[test]
    fn volume_density_of_diagonal() {
        let dom = ChartDomain::cube(2, 1.0, 4).unwrap();
        let g = MetricField::diagonal(dom, vec![Expr::c(4.0), Expr::c(9.0)]).unwrap();
        assert!((volume_density(&g, &[0.0, 0.0]).unwrap() - 6.0).abs() < 1e-14);
    }
}
