//! Conformal rescaling `g̃ = e^{2φ} g` and residuals of the conformal change laws.
//!
//! Matrix-valued residuals are measured as the spectral norm of the
//! coordinate-component difference divided by `1 + ‖g‖`; scalar residuals
//! are divided by the same factor.

use crate::chart::{jets, ChartDomain, Ctx, ScalarField, VectorFn};
use crate::curvature::{grad_laplace_with, CurvatureBundle, LocalGeometry, MetricField};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::exterior::field::form_jet;
use crate::exterior::{ExtD, FormField, Weighted};
use crate::holonomy::{transport_matrix, Connection, Path, TransportOptions};
use crate::linalg::Mat;
use crate::scalar::Scalar;

/// A metric, a conformal factor and the rescaled metric built from them.
#[derive(Clone, Debug, PartialEq)]
pub struct ConformalPair {
    pub g: MetricField,
    pub phi: ScalarField,
    pub tilde: MetricField,
}

impl ConformalPair {
    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn dom(&self) -> &ChartDomain {
        self.g.dom()
    }
}

pub fn rescale(g: &MetricField, phi: &ScalarField) -> Result<ConformalPair> {
    if let Some(v) = phi.expr.max_var() {
        if v >= g.dim() {
            return Err(Error::DomainMismatch(format!(
                "conformal factor uses coordinate {v} on a {}-dimensional chart",
                g.dim()
            )));
        }
    }
    Ok(ConformalPair { g: g.clone(), phi: phi.clone(), tilde: g.conformal(&phi.expr) })
}

fn normalized(m: &Mat<f64>, g: &Mat<f64>) -> f64 {
    m.op_norm() / (1.0 + g.op_norm())
}

/// Connection law: `∇̃_X Y − ∇_X Y − dφ(X)Y − dφ(Y)X + g(X,Y) grad φ` over coordinate pairs.
pub fn connection_law_residual(pair: &ConformalPair, x: &[f64], ctx: &Ctx) -> Result<f64> {
    let n = pair.dim();
    let x = pair.dom().wrap(x)?;
    let geo = LocalGeometry::at(&pair.g, &x, 1, ctx)?;
    let geot = LocalGeometry::at(&pair.tilde, &x, 1, ctx)?;
    let gl = grad_laplace_with(&geo, &pair.phi, &x, ctx)?;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut rhs = geo.gamma(k, i, j) - geo.g[(i, j)] * gl.grad[k];
                if k == j {
                    rhs += gl.dphi[i];
                }
                if k == i {
                    rhs += gl.dphi[j];
                }
                worst = worst.max((geot.gamma(k, i, j) - rhs).abs());
            }
        }
    }
    Ok(worst / (1.0 + geo.g.op_norm()))
}

/// Curvature of both metrics plus derivative data of φ at one point.
struct PairData {
    geo: LocalGeometry<f64>,
    cb: CurvatureBundle<f64>,
    cbt: CurvatureBundle<f64>,
    gl: crate::curvature::GradLaplace<f64>,
    e2phi: f64,
}

fn pair_data(pair: &ConformalPair, x: &[f64], ctx: &Ctx) -> Result<PairData> {
    let x = pair.dom().wrap(x)?;
    let geo = LocalGeometry::at(&pair.g, &x, 2, ctx)?;
    let geot = LocalGeometry::at(&pair.tilde, &x, 2, ctx)?;
    let cb = CurvatureBundle::from_geometry(&geo)?;
    let cbt = CurvatureBundle::from_geometry(&geot)?;
    let gl = grad_laplace_with(&geo, &pair.phi, &x, ctx)?;
    let e2phi = (2.0 * pair.phi.value(&x)).exp();
    Ok(PairData { geo, cb, cbt, gl, e2phi })
}

/// Trace-free Ricci law:
/// `Ric0~ = Ric0 − (n−2)(∇dφ − dφ⊗dφ) − ((n−2)/n)(Δφ + |dφ|²) g`.
pub fn trace_free_ricci_residual(pair: &ConformalPair, x: &[f64], ctx: &Ctx) -> Result<f64> {
    let d = pair_data(pair, x, ctx)?;
    let n = pair.dim() as f64;
    let outer = Mat::from_fn(d.geo.n, d.geo.n, |i, j| d.gl.dphi[i] * d.gl.dphi[j]);
    let rhs = d
        .cb
        .ric0
        .sub(&d.gl.hessian.sub(&outer).scale_by(&(n - 2.0)))
        .sub(&d.geo.g.scale_by(&((n - 2.0) / n * (d.gl.laplacian + d.gl.norm2))));
    Ok(normalized(&d.cbt.ric0.sub(&rhs), &d.geo.g))
}

/// Defects of the parallel-field certificate and the quantities it unlocks.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    /// Largest g-norm change of ξ₀ under transport along the test curves.
    pub transport_defect: f64,
    /// `|∇_ξ dφ|`.
    pub hess_defect: f64,
    /// `|dφ(ξ)|`.
    pub dphi_defect: f64,
    /// `|Ric(ξ)|`.
    pub ricci_defect: f64,
}

impl Certificate {
    pub fn holds(&self, tol: f64) -> bool {
        self.hess_defect < tol && self.dphi_defect < tol && self.ricci_defect < tol
    }
}

/// Output of [`scalar_law_residual`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarLaw {
    /// `e^{2φ} Scal~ − Scal − 2(n−1)Δφ + (n−2)(n−1)|dφ|²`.
    pub r1: f64,
    /// `e^{2φ} Scal~ − n(Δφ − (n−2)|dφ|²)`, only when the certificate holds.
    pub r2: Option<f64>,
    /// `Scal + (n−2)(Δφ + |dφ|²)`, only when the certificate holds.
    pub obstruction: Option<f64>,
    pub certificate: Option<Certificate>,
}

/// Tolerance on transport of the claimed parallel field.
pub const PARALLEL_TOL: f64 = 1e-6;

/// Transport `ξ₀(x)` along short coordinate segments and compare with `ξ₀` at the end points.
pub fn parallel_defect(g: &MetricField, xi: &[Expr], x: &[f64], len: f64) -> Result<f64> {
    let n = g.dim();
    let conn = Connection::new(g, crate::chart::Backend::Dual);
    let v0: Vec<f64> = xi.iter().map(|e| e.eval(x)).collect();
    let mut worst: f64 = 0.0;
    for axis in 0..n {
        for sign in [1.0, -1.0] {
            let mut y = x.to_vec();
            y[axis] += sign * len;
            if !g.dom().contains(&y) {
                continue;
            }
            let p = transport_matrix(&conn, &Path::segment(x.to_vec(), y.clone()), &TransportOptions::default())?;
            let moved = p.mul_vec(&v0);
            let target: Vec<f64> = xi.iter().map(|e| e.eval(&y)).collect();
            let diff: Vec<f64> = moved.iter().zip(&target).map(|(a, b)| a - b).collect();
            worst = worst.max(g.matrix(&y).bilinear(&diff, &diff).max(0.0).sqrt());
        }
    }
    Ok(worst)
}

/// Scalar curvature law, with the combined law when a parallel field `xi` is supplied.
pub fn scalar_law_residual(pair: &ConformalPair, x: &[f64], ctx: &Ctx, xi: Option<&[Expr]>) -> Result<ScalarLaw> {
    let d = pair_data(pair, x, ctx)?;
    let n = pair.dim() as f64;
    let scale = 1.0 + d.geo.g.op_norm();
    let lhs = d.e2phi * d.cbt.scal;
    let r1 = (lhs - (d.cb.scal + 2.0 * (n - 1.0) * d.gl.laplacian - (n - 2.0) * (n - 1.0) * d.gl.norm2)).abs() / scale;
    let Some(xi) = xi else {
        return Ok(ScalarLaw { r1, r2: None, obstruction: None, certificate: None });
    };
    if xi.len() != pair.dim() {
        return Err(Error::DimensionMismatch("parallel field has wrong number of components".into()));
    }
    let x = pair.dom().wrap(x)?;
    let transport_defect = parallel_defect(&pair.g, xi, &x, 0.1)?;
    if transport_defect > PARALLEL_TOL {
        return Err(Error::NotParallel { defect: transport_defect });
    }
    let v: Vec<f64> = xi.iter().map(|e| e.eval(&x)).collect();
    let hv = d.gl.hessian.mul_vec(&v);
    let rv = d.cb.ricci.mul_vec(&v);
    let norm = |w: &[f64]| d.geo.ginv.bilinear(w, w).max(0.0).sqrt();
    let cert = Certificate {
        transport_defect,
        hess_defect: norm(&hv),
        dphi_defect: d.gl.dphi.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>().abs(),
        ricci_defect: norm(&rv),
    };
    let (r2, obstruction) = if cert.holds(PARALLEL_TOL) {
        (
            Some((lhs - n * (d.gl.laplacian - (n - 2.0) * d.gl.norm2)).abs() / scale),
            Some((d.cb.scal + (n - 2.0) * (d.gl.laplacian + d.gl.norm2)).abs() / scale),
        )
    } else {
        (None, None)
    };
    Ok(ScalarLaw { r1, r2, obstruction, certificate: Some(cert) })
}

/// Einstein measures for both metrics and the gradient-field identity
/// `∇(e^{−φ}dφ) = e^{−φ} f g`, `f = −(Δφ + |dφ|²)/n`.
#[derive(Clone, Debug, PartialEq)]
pub struct EinsteinDiagnostics {
    pub ric0_g: f64,
    pub ric0_tilde: f64,
    pub f: f64,
    pub ng_residual: f64,
}

pub fn einstein_pair_diagnostics(pair: &ConformalPair, x: &[f64], ctx: &Ctx) -> Result<EinsteinDiagnostics> {
    let d = pair_data(pair, x, ctx)?;
    let n = d.geo.n;
    let x = pair.dom().wrap(x)?;
    let gt = pair.tilde.matrix(&x);
    let f = -(d.gl.laplacian + d.gl.norm2) / n as f64;
    // ∇ of the 1-form e^{−φ}dφ, differentiated as a form field.
    let dphi = FormField::exact(n, &pair.phi.expr);
    let alpha = Weighted { phi: &pair.phi.expr, weight: -1.0, inner: &dphi };
    let nabla = form_jet(&alpha, &x, ctx)?.covariant(&d.geo)?;
    let na = Mat::from_fn(n, n, |m, k| nabla[m].coeffs()[k]);
    let target = d.geo.g.scale_by(&((-pair.phi.value(&x)).exp() * f));
    Ok(EinsteinDiagnostics {
        ric0_g: normalized(&d.cb.ric0, &d.geo.g),
        ric0_tilde: normalized(&d.cbt.ric0, &gt),
        f,
        ng_residual: normalized(&na.sub(&target), &d.geo.g),
    })
}

/// `(L_ξ g)_ij = ξ^k ∂_k g_ij + g_kj ∂_i ξ^k + g_ik ∂_j ξ^k`.
pub fn lie_derivative_metric<V: VectorFn>(g: &MetricField, xi: &V, x: &[f64], ctx: &Ctx) -> Result<Mat<f64>> {
    let n = g.dim();
    if xi.dim_out() != n {
        return Err(Error::DimensionMismatch("vector field has wrong number of components".into()));
    }
    let x = g.dom().wrap(x)?;
    let geo = LocalGeometry::at(g, &x, 1, ctx)?;
    let js = jets(xi, &x, 1, ctx)?;
    Ok(Mat::from_fn(n, n, |i, j| {
        (0..n)
            .map(|k| js[k].value * geo.dg[k][(i, j)] + geo.g[(k, j)] * js[k].d1[i] + geo.g[(i, k)] * js[k].d1[j])
            .sum()
    }))
}

/// `|h|_g = (h_ij h_kl g^ik g^jl)^{1/2}`.
pub fn tensor_norm(h: &Mat<f64>, ginv: &Mat<f64>) -> f64 {
    let a = ginv.mul(h);
    a.mul(&a).trace().max(0.0).sqrt()
}

/// Conformal and Killing defects of a vector field, in the g-norm:
/// `conf = |(L_ξ g)_0|_g`, `killing = |L_ξ g|_g`.
pub fn conformal_vector_residual<V: VectorFn>(g: &MetricField, xi: &V, x: &[f64], ctx: &Ctx) -> Result<(f64, f64)> {
    let lie = lie_derivative_metric(g, xi, x, ctx)?;
    let gm = g.matrix_at(x)?;
    let ginv = gm.inverse()?;
    let tr = ginv.mul(&lie).trace();
    let trace_free = lie.sub(&gm.scale_by(&(tr / g.dim() as f64)));
    Ok((tensor_norm(&trace_free, &ginv), tensor_norm(&lie, &ginv)))
}

/// Vector field with expression components.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField(pub Vec<Expr>);

impl VectorFn for VectorField {
    fn dim_out(&self) -> usize {
        self.0.len()
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        Ok(self.0.iter().map(|e| e.eval(x)).collect())
    }
}

/// `α♯` of a 1-form field with respect to a metric.
pub struct SharpOf<'a, F> {
    pub metric: &'a MetricField,
    pub form: F,
}

impl<F: crate::exterior::FormFn> VectorFn for SharpOf<'_, F> {
    fn dim_out(&self) -> usize {
        self.metric.dim()
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        let a = self.form.eval(x)?;
        if a.degree() != 1 {
            return Err(Error::RankMismatch("sharp needs a 1-form".into()));
        }
        Ok(self.metric.matrix(x).inverse()?.mul_vec(a.coeffs()))
    }
}

/// The vector field `ξ = (e^{−φ}dφ)♯`.
pub fn gradient_field<'a>(pair: &'a ConformalPair, ctx: &Ctx) -> SharpOf<'a, Weighted<'a, ExtD<ScalarAsForm>>> {
    SharpOf {
        metric: &pair.g,
        form: Weighted {
            phi: &pair.phi.expr,
            weight: -1.0,
            inner: ExtD { inner: ScalarAsForm { n: pair.dim(), f: pair.phi.expr.clone() }, ctx: ctx.clone() },
        },
    }
}

/// A scalar expression viewed as a 0-form.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarAsForm {
    pub n: usize,
    pub f: Expr,
}

impl crate::exterior::FormFn for ScalarAsForm {
    fn dim(&self) -> usize {
        self.n
    }
    fn degree(&self) -> usize {
        0
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Result<crate::exterior::Form<S>> {
        Ok(crate::exterior::Form::scalar(self.n, self.f.eval(x)))
    }
}

/// `e^{−φ} = ‖x‖² + c` on a flat chart: the conformal pair whose rescaled
/// metric is a round sphere of radius `1/(2√c)`.
pub fn mobius_pair(dom: ChartDomain, c: f64) -> Result<ConformalPair> {
    let n = dom.dim();
    let phi = Expr::neg(Expr::ln(Expr::add(Expr::norm2(0..n), Expr::c(c))));
    rescale(&MetricField::flat(dom), &ScalarField::new(phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Backend;
    use crate::expr::parse;

    fn flat(n: usize) -> MetricField {
        MetricField::flat(ChartDomain::cube(n, 1.0, 4).unwrap())
    }

    fn phi(src: &str, n: usize) -> ScalarField {
        ScalarField::new(parse(src, &crate::expr::default_names(n)).unwrap())
    }

    #[test]
    fn constant_factor_is_homothety() {
        let pair = rescale(&flat(2), &ScalarField::constant(2f64.ln())).unwrap();
        let m = pair.tilde.matrix(&[0.1, 0.2]);
        assert!((m[(0, 0)] - 4.0).abs() < 1e-14 && m[(0, 1)] == 0.0);
    }

    #[test]
    fn connection_law_on_sine_factor() {
        let pair = rescale(&flat(2), &phi("0.1*sin(x)", 2)).unwrap();
        let ctx = pair.g.ctx(Backend::Dual);
        assert!(connection_law_residual(&pair, &[0.3, -0.2], &ctx).unwrap() < 1e-12);
    }

    #[test]
    fn trace_free_law_in_three_dimensions() {
        let pair = rescale(&flat(3), &phi("0.2*sin(x)*cos(y)", 3)).unwrap();
        for b in [Backend::Dual, Backend::Fd] {
            let r = trace_free_ricci_residual(&pair, &[0.3, 0.1, -0.4], &pair.g.ctx(b)).unwrap();
            assert!(r < 1e-6, "{b:?} {r}");
        }
    }

    #[test]
    fn euler_field_is_conformal_not_killing() {
        let g = flat(2);
        let xi = VectorField(vec![Expr::var(0), Expr::var(1)]);
        let (conf, killing) = conformal_vector_residual(&g, &xi, &[0.2, 0.3], &g.ctx(Backend::Dual)).unwrap();
        assert!(conf < 1e-12);
        assert!((killing - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn unknown_coordinate_in_factor_is_rejected() {
        let f = ScalarField::new(Expr::var(3));
        assert!(matches!(rescale(&flat(2), &f), Err(Error::DomainMismatch(_))));
    }
}
