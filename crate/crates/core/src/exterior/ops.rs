//! Differential operators on form fields and the twistor, transport and basic residuals.
//!
//! Form residuals are absolute and measured in the pointwise norm induced by g.

use crate::chart::Ctx;
use crate::conformal::ConformalPair;
use crate::curvature::{grad_laplace_with, LocalGeometry, MetricField};
use crate::error::{Error, Result};
use crate::holonomy::Distribution;
use crate::linalg::Mat;

use super::field::{along, codiff_from, form_jet, ExtD, FormFn, Hodge, Weighted};
use super::form::{flat, Form};

pub fn exterior_derivative<F: FormFn>(psi: &F, x: &[f64], ctx: &Ctx) -> Result<Form<f64>> {
    form_jet(psi, x, ctx)?.exterior()
}

/// `∇_{∂_m} ψ` for each coordinate direction `m`.
pub fn covariant_derivative<F: FormFn>(g: &MetricField, psi: &F, x: &[f64], ctx: &Ctx) -> Result<Vec<Form<f64>>> {
    let x = g.dom().wrap(x)?;
    let geo = LocalGeometry::at(g, &x, 1, ctx)?;
    form_jet(psi, &x, ctx)?.covariant(&geo)
}

/// `δψ = −Σ_a e_a ⌟ ∇_{e_a} ψ` over a Gram–Schmidt orthonormal frame.
pub fn codifferential<F: FormFn>(g: &MetricField, psi: &F, x: &[f64], ctx: &Ctx) -> Result<Form<f64>> {
    if psi.degree() == 0 {
        return Err(Error::DegreeUnderflow);
    }
    let x = g.dom().wrap(x)?;
    let geo = LocalGeometry::at(g, &x, 1, ctx)?;
    let nabla = form_jet(psi, &x, ctx)?.covariant(&geo)?;
    codiff_from(&nabla, &geo.frame()?)
}

/// `(−1)^{n(p−1)−1} ∗d∗ψ`, the Hodge route to the codifferential.
pub fn codifferential_hodge<F: FormFn>(g: &MetricField, psi: &F, x: &[f64], ctx: &Ctx) -> Result<Form<f64>> {
    let (n, p) = (psi.dim() as i64, psi.degree() as i64);
    if p == 0 {
        return Err(Error::DegreeUnderflow);
    }
    let x = g.dom().wrap(x)?;
    let inner = Hodge { metric: g, inner: psi };
    let d = ExtD { inner: &inner, ctx: ctx.clone() };
    let out = Hodge { metric: g, inner: &d }.eval(&x)?;
    let e = n * (p - 1) - 1;
    Ok(if e.rem_euclid(2) == 0 { out } else { out.scale(-1.0) })
}

pub fn hodge_star<F: FormFn>(g: &MetricField, psi: &F, x: &[f64]) -> Result<Form<f64>> {
    let x = g.dom().wrap(x)?;
    psi.eval(&x)?.hodge(&g.matrix(&x), g.orientation())
}

/// Everything first-order about a form at a point: value, `∇ψ`, `dψ`, `δψ`.
pub struct FirstOrder {
    pub geo: LocalGeometry<f64>,
    pub frame: Mat<f64>,
    pub value: Form<f64>,
    pub nabla: Vec<Form<f64>>,
    pub d: Form<f64>,
    pub delta: Form<f64>,
}

impl FirstOrder {
    pub fn at<F: FormFn>(g: &MetricField, psi: &F, x: &[f64], ctx: &Ctx) -> Result<Self> {
        let p = psi.degree();
        if p == 0 {
            return Err(Error::DegreeUnderflow);
        }
        if p > psi.dim() {
            return Err(Error::DegreeOverflow { p, q: 0, n: psi.dim() });
        }
        let geo = LocalGeometry::at(g, x, 1, ctx)?;
        let frame = geo.frame()?;
        let jet = form_jet(psi, x, ctx)?;
        let nabla = jet.covariant(&geo)?;
        let d = if p < psi.dim() { jet.exterior()? } else { Form::zero(psi.dim(), 0) };
        let delta = codiff_from(&nabla, &frame)?;
        Ok(FirstOrder { geo, frame, value: jet.value, nabla, d, delta })
    }

    /// `∇_X ψ − X⌟dψ/(p+1) + X♭∧δψ/(n−p+1)` for a vector `X`, with `♭` taken in `flat_metric`.
    pub fn twistor_operator(&self, xv: &[f64], flat_metric: &Mat<f64>) -> Result<Form<f64>> {
        let (n, p) = (self.value.dim(), self.value.degree());
        let mut t = along(&self.nabla, xv);
        if p < n {
            t = t.sub(&self.d.interior(xv)?.scale(1.0 / (p as f64 + 1.0)));
        }
        let xb = flat(flat_metric, xv);
        Ok(t.add(&xb.wedge(&self.delta)?.scale(1.0 / (n as f64 - p as f64 + 1.0))))
    }
}

/// Output of [`twistor_killing_residual`].
#[derive(Clone, Debug, PartialEq)]
pub struct TwistorResidual {
    /// Largest twistor-operator norm over an orthonormal frame.
    pub twistor: f64,
    /// `|δψ|`.
    pub coclosed: f64,
    /// Largest `|X⌟∇_X ψ|` over unit frame vectors and their normalised pairwise sums.
    pub killing: f64,
}

pub fn twistor_killing_residual<F: FormFn>(g: &MetricField, psi: &F, x: &[f64], ctx: &Ctx) -> Result<TwistorResidual> {
    let p = psi.degree();
    let n = psi.dim();
    if p == 0 {
        return Err(Error::DegreeUnderflow);
    }
    if p >= n {
        return Err(Error::DegreeOverflow { p, q: 0, n });
    }
    let x = g.dom().wrap(x)?;
    let fo = FirstOrder::at(g, psi, &x, ctx)?;
    let ginv = &fo.geo.ginv;
    let mut twistor: f64 = 0.0;
    let mut killing: f64 = 0.0;
    let cols: Vec<Vec<f64>> = (0..n).map(|a| fo.frame.column(a)).collect();
    for a in 0..n {
        twistor = twistor.max(fo.twistor_operator(&cols[a], &fo.geo.g)?.norm(ginv));
        for b in a..n {
            let v: Vec<f64> = if a == b {
                cols[a].clone()
            } else {
                cols[a].iter().zip(&cols[b]).map(|(u, w)| (u + w) / 2f64.sqrt()).collect()
            };
            killing = killing.max(along(&fo.nabla, &v).interior(&v)?.norm(ginv));
        }
    }
    Ok(TwistorResidual { twistor, coclosed: fo.delta.norm(ginv), killing })
}

/// Residuals of the transport laws for `ψ~ = e^{(p+1)φ} ψ` under `g~ = e^{2φ} g`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportResidual {
    /// `dψ~ − e^{(p+1)φ}(dψ + (p+1) dφ∧ψ)`.
    pub d: f64,
    /// `∇~_X ψ~ − e^{(p+1)φ}(∇_X ψ + dφ(X)ψ + X♭∧(grad φ⌟ψ) − dφ∧(X⌟ψ))`.
    pub nabla: f64,
    /// `δ~ψ~ − e^{(p−1)φ}(δψ − (n−p+1) grad φ⌟ψ)`.
    pub delta: f64,
    /// Twistor operator of `ψ~` under `g~` minus `e^{(p+1)φ}` times that of `ψ` under `g`.
    pub twistor_preserved: f64,
}

pub fn conformal_form_transport<F: FormFn>(
    pair: &ConformalPair,
    psi: &F,
    x: &[f64],
    ctx: &Ctx,
) -> Result<TransportResidual> {
    let (n, p) = (psi.dim(), psi.degree());
    if p == 0 {
        return Err(Error::DegreeUnderflow);
    }
    let x = pair.dom().wrap(x)?;
    let tilde_psi = Weighted { phi: &pair.phi.expr, weight: p as f64 + 1.0, inner: psi };
    let fo = FirstOrder::at(&pair.g, psi, &x, ctx)?;
    let fot = FirstOrder::at(&pair.tilde, &tilde_psi, &x, ctx)?;
    let gl = grad_laplace_with(&fo.geo, &pair.phi, &x, ctx)?;
    let phi = pair.phi.value(&x);
    let w = ((p as f64 + 1.0) * phi).exp();
    let ginv = &fo.geo.ginv;
    let dphi = Form::one_form(gl.dphi.clone());
    let grad_in = fo.value.interior(&gl.grad)?;

    let d = if p < n {
        let rhs = fo.d.add(&dphi.wedge(&fo.value)?.scale(p as f64 + 1.0)).scale(w);
        fot.d.sub(&rhs).norm(ginv)
    } else {
        0.0
    };

    let mut nabla: f64 = 0.0;
    let mut preserved: f64 = 0.0;
    let gt = &fot.geo.g;
    for a in 0..n {
        let xv = fo.frame.column(a);
        let dphi_x: f64 = gl.dphi.iter().zip(&xv).map(|(u, v)| u * v).sum();
        let rhs = along(&fo.nabla, &xv)
            .add(&fo.value.scale(dphi_x))
            .add(&flat(&fo.geo.g, &xv).wedge(&grad_in)?)
            .sub(&dphi.wedge(&fo.value.interior(&xv)?)?)
            .scale(w);
        nabla = nabla.max(along(&fot.nabla, &xv).sub(&rhs).norm(ginv));
        let lhs = fot.twistor_operator(&xv, gt)?;
        let base = fo.twistor_operator(&xv, &fo.geo.g)?.scale(w);
        preserved = preserved.max(lhs.sub(&base).norm(ginv));
    }

    let rhs = fo.delta.sub(&grad_in.scale(n as f64 - p as f64 + 1.0)).scale(((p as f64 - 1.0) * phi).exp());
    let delta = fot.delta.sub(&rhs).norm(ginv);
    Ok(TransportResidual { d, nabla, delta, twistor_preserved: preserved })
}

/// `max_X |X⌟ψ| + |∇_X ψ|` over a g-orthonormal basis `X` of the complement of `d`.
pub fn basic_residual<F: FormFn>(
    g: &MetricField,
    psi: &F,
    d: &Distribution,
    x: &[f64],
    ctx: &Ctx,
) -> Result<f64> {
    let n = g.dim();
    if d.dim() != n {
        return Err(Error::RankMismatch(format!("distribution lives in dimension {}, metric {n}", d.dim())));
    }
    let x = g.dom().wrap(x)?;
    let complement = d.complement_basis(&x)?;
    let geo = LocalGeometry::at(g, &x, 1, ctx)?;
    let jet = form_jet(psi, &x, ctx)?;
    let nabla = jet.covariant(&geo)?;
    let mut worst: f64 = 0.0;
    for v in &complement {
        let inner = if psi.degree() == 0 { 0.0 } else { jet.value.interior(v)?.norm(&geo.ginv) };
        worst = worst.max(inner + along(&nabla, v).norm(&geo.ginv));
    }
    Ok(worst)
}

/// Volume form of a distribution: `e_1♭ ∧ … ∧ e_k♭` for a g-orthonormal basis of it.
pub fn distribution_volume_form(g: &MetricField, d: &Distribution, x: &[f64]) -> Result<Form<f64>> {
    let x = g.dom().wrap(x)?;
    let gm = g.matrix(&x);
    let basis = d.orthonormal_basis(&x)?;
    let mut out = Form::scalar(g.dim(), 1.0);
    for v in &basis {
        out = out.wedge(&flat(&gm, v))?;
    }
    Ok(out)
}
