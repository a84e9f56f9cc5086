//! Form-valued fields and lazy operator combinators.
//!
//! Every combinator evaluates on any [`Scalar`], so `ExtD<ExtD<F>>` or
//! `Codiff<Codiff<F>>` differentiate through nested dual numbers.

use crate::chart::{jets, Ctx, VectorFn};
use crate::curvature::{LocalGeometry, MetricField};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::linalg::Mat;
use crate::scalar::Scalar;

use super::form::{binom, derivation, flat, Form};

/// A smooth p-form field on a chart.
pub trait FormFn {
    fn dim(&self) -> usize;
    fn degree(&self) -> usize;
    fn eval<S: Scalar>(&self, x: &[S]) -> Result<Form<S>>;
}

impl<F: FormFn + ?Sized> FormFn for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn degree(&self) -> usize {
        (**self).degree()
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Result<Form<S>> {
        (**self).eval(x)
    }
}

/// Views a form field as a vector of its coefficients.
struct Coeffs<'a, F>(&'a F);

impl<F: FormFn> VectorFn for Coeffs<'_, F> {
    fn dim_out(&self) -> usize {
        binom(self.0.dim(), self.0.degree())
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        Ok(self.0.eval(x)?.into_coeffs())
    }
}

/// Value and coordinate derivatives `∂_m ψ` of a form field at a point.
#[derive(Clone, Debug)]
pub struct FormJet<S> {
    pub value: Form<S>,
    pub partials: Vec<Form<S>>,
}

pub fn form_jet<S: Scalar, F: FormFn>(f: &F, x: &[S], ctx: &Ctx) -> Result<FormJet<S>> {
    let (n, p) = (f.dim(), f.degree());
    let js = jets(&Coeffs(f), x, 1, ctx)?;
    let value = Form::from_coeffs(n, p, js.iter().map(|j| j.value.clone()).collect())?;
    let partials = (0..n)
        .map(|m| Form::from_coeffs(n, p, js.iter().map(|j| j.d1[m].clone()).collect()))
        .collect::<Result<Vec<_>>>()?;
    Ok(FormJet { value, partials })
}

impl<S: Scalar> FormJet<S> {
    /// `dψ = Σ_m dx^m ∧ ∂_m ψ`.
    pub fn exterior(&self) -> Result<Form<S>> {
        let n = self.value.dim();
        let mut out = Form::zero(n, self.value.degree() + 1);
        for (m, dm) in self.partials.iter().enumerate() {
            out = out.add(&Form::basis(n, &[m]).wedge(dm)?);
        }
        Ok(out)
    }

    /// `∇_{∂_m} ψ` for every coordinate direction.
    pub fn covariant(&self, geo: &LocalGeometry<S>) -> Result<Vec<Form<S>>> {
        let n = geo.n;
        (0..n)
            .map(|m| {
                let mut e = vec![S::zero(); n];
                e[m] = S::one();
                let gm = geo.gamma_along(&e);
                Ok(self.partials[m].sub(&derivation(&gm, &self.value)?))
            })
            .collect()
    }
}

/// `∇_X ψ` from the coordinate covariant derivatives.
pub fn along<S: Scalar>(nabla: &[Form<S>], x: &[S]) -> Form<S> {
    let mut out = Form::zero(nabla[0].dim(), nabla[0].degree());
    for (m, nm) in nabla.iter().enumerate() {
        out = out.add(&nm.mul(&x[m]));
    }
    out
}

/// `δψ = −Σ_a e_a ⌟ ∇_{e_a} ψ` over an orthonormal frame (columns of `frame`).
pub fn codiff_from<S: Scalar>(nabla: &[Form<S>], frame: &Mat<S>) -> Result<Form<S>> {
    let n = frame.cols();
    let p = nabla[0].degree();
    if p == 0 {
        return Err(Error::DegreeUnderflow);
    }
    let mut out = Form::zero(n, p - 1);
    for a in 0..n {
        let e = frame.column(a);
        out = out.sub(&along(nabla, &e).interior(&e)?);
    }
    Ok(out)
}

/// A form with expression coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct FormField {
    n: usize,
    p: usize,
    coeffs: Vec<Expr>,
}

impl FormField {
    pub fn new(n: usize, p: usize, coeffs: Vec<Expr>) -> Result<Self> {
        if p > n {
            return Err(Error::DegreeOverflow { p, q: 0, n });
        }
        if coeffs.len() != binom(n, p) {
            return Err(Error::DimensionMismatch(format!("{p}-form in dimension {n} needs {} coefficients", binom(n, p))));
        }
        Ok(FormField { n, p, coeffs })
    }

    /// `c · dx^{i_1} ∧ … ∧ dx^{i_p}`.
    pub fn monomial(n: usize, idx: &[usize], c: Expr) -> Self {
        let basis = Form::<f64>::basis(n, idx);
        let coeffs = basis.coeffs().iter().map(|&s| Expr::mul(Expr::c(s), c.clone())).collect();
        FormField { n, p: idx.len(), coeffs }
    }

    /// Differential of a scalar expression.
    pub fn exact(n: usize, f: &Expr) -> Self {
        FormField { n, p: 1, coeffs: (0..n).map(|i| f.diff(i)).collect() }
    }

    pub fn coeffs(&self) -> &[Expr] {
        &self.coeffs
    }

    pub fn plus(&self, o: &FormField) -> Self {
        assert_eq!((self.n, self.p), (o.n, o.p));
        FormField {
            n: self.n,
            p: self.p,
            coeffs: self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| Expr::add(a.clone(), b.clone())).collect(),
        }
    }
}

impl FormFn for FormField {
    fn dim(&self) -> usize {
        self.n
    }
    fn degree(&self) -> usize {
        self.p
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Result<Form<S>> {
        Form::from_coeffs(self.n, self.p, self.coeffs.iter().map(|c| c.eval(x)).collect())
    }
}

/// Exterior derivative of the inner field.
pub struct ExtD<F> {
    pub inner: F,
    pub ctx: Ctx,
}

impl<F: FormFn> FormFn for ExtD<F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn degree(&self) -> usize {
        self.inner.degree() + 1
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Result<Form<S>> {
        form_jet(&self.inner, x, &self.ctx)?.exterior()
    }
}

/// Codifferential of the inner field for a metric.
pub struct Codiff<'a, F> {
    pub metric: &'a MetricField,
    pub inner: F,
    pub ctx: Ctx,
}

impl<F: FormFn> FormFn for Codiff<'_, F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn degree(&self) -> usize {
        self.inner.degree().saturating_sub(1)
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Result<Form<S>> {
        if self.inner.degree() == 0 {
            return Err(Error::DegreeUnderflow);
        }
        let geo = LocalGeometry::at(self.metric, x, 1, &self.ctx)?;
        let nabla = form_jet(&self.inner, x, &self.ctx)?.covariant(&geo)?;
        codiff_from(&nabla, &geo.frame()?)
    }
}

/// Hodge star of the inner field.
pub struct Hodge<'a, F> {
    pub metric: &'a MetricField,
    pub inner: F,
}

impl<F: FormFn> FormFn for Hodge<'_, F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn degree(&self) -> usize {
        self.inner.dim() - self.inner.degree()
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Result<Form<S>> {
        self.inner.eval(x)?.hodge(&self.metric.matrix(x), self.metric.orientation())
    }
}

/// `e^{w φ} · inner`.
pub struct Weighted<'a, F> {
    pub phi: &'a Expr,
    pub weight: f64,
    pub inner: F,
}

impl<F: FormFn> FormFn for Weighted<'_, F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn degree(&self) -> usize {
        self.inner.degree()
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Result<Form<S>> {
        let f = self.phi.eval(x).scale(self.weight).exp();
        Ok(self.inner.eval(x)?.mul(&f))
    }
}

/// Pointwise wedge of two fields.
pub struct Wedge<A, B>(pub A, pub B);

impl<A: FormFn, B: FormFn> FormFn for Wedge<A, B> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn degree(&self) -> usize {
        self.0.degree() + self.1.degree()
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Result<Form<S>> {
        self.0.eval(x)?.wedge(&self.1.eval(x)?)
    }
}

/// Metric dual of a vector field given by expressions: `ξ♭ = g(ξ, ·)`.
pub struct FlatOf<'a> {
    pub metric: &'a MetricField,
    pub field: &'a [Expr],
}

impl FormFn for FlatOf<'_> {
    fn dim(&self) -> usize {
        self.metric.dim()
    }
    fn degree(&self) -> usize {
        1
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Result<Form<S>> {
        let v: Vec<S> = self.field.iter().map(|e| e.eval(x)).collect();
        Ok(flat(&self.metric.matrix(x), &v))
    }
}
