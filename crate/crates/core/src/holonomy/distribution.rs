//! Distributions represented by their g-orthogonal projector fields.

use std::any::TypeId;

use crate::chart::{jets, Backend, Ctx, VectorFn};
use crate::curvature::{LocalGeometry, MetricField};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::linalg::Mat;
use crate::scalar::{re_vec, Scalar};

use super::transport::{axis_ray, transport_matrix, Connection, TransportOptions};

/// A field of tangent subspaces.
#[derive(Clone, Debug, PartialEq)]
pub enum Distribution {
    /// Span of vector fields with expression components.
    Span { metric: MetricField, basis: Vec<Vec<Expr>> },
    /// Subspace at `x0` carried over the chart by transport along axis-parallel rays.
    Transported { metric: MetricField, x0: Vec<f64>, basis0: Vec<Vec<f64>> },
    /// g-orthogonal complement.
    Complement(Box<Distribution>),
}

impl Distribution {
    /// Span of the coordinate directions `axes`.
    pub fn coordinate_block(metric: &MetricField, axes: &[usize]) -> Self {
        let n = metric.dim();
        let basis = axes
            .iter()
            .map(|&a| (0..n).map(|i| Expr::c(if i == a { 1.0 } else { 0.0 })).collect())
            .collect();
        Distribution::Span { metric: metric.clone(), basis }
    }

    pub fn complement(&self) -> Self {
        match self {
            Distribution::Complement(inner) => (**inner).clone(),
            other => Distribution::Complement(Box::new(other.clone())),
        }
    }

    pub fn metric(&self) -> &MetricField {
        match self {
            Distribution::Span { metric, .. } | Distribution::Transported { metric, .. } => metric,
            Distribution::Complement(inner) => inner.metric(),
        }
    }

    /// Same subspaces, measured with another metric (used for projectors of the conformal partner).
    pub fn with_metric(&self, m: &MetricField) -> Self {
        match self {
            Distribution::Span { basis, .. } => Distribution::Span { metric: m.clone(), basis: basis.clone() },
            Distribution::Transported { x0, basis0, .. } => {
                Distribution::Transported { metric: m.clone(), x0: x0.clone(), basis0: basis0.clone() }
            }
            Distribution::Complement(inner) => Distribution::Complement(Box::new(inner.with_metric(m))),
        }
    }

    pub fn dim(&self) -> usize {
        self.metric().dim()
    }

    pub fn rank(&self) -> usize {
        match self {
            Distribution::Span { basis, .. } => basis.len(),
            Distribution::Transported { basis0, .. } => basis0.len(),
            Distribution::Complement(inner) => self.dim() - inner.rank(),
        }
    }

    fn smooth(&self) -> bool {
        match self {
            Distribution::Span { .. } => true,
            Distribution::Transported { .. } => false,
            Distribution::Complement(inner) => inner.smooth(),
        }
    }

    /// Backend used to differentiate the projector field.
    pub fn derivative_backend(&self, requested: Backend) -> Backend {
        if self.smooth() {
            requested
        } else {
            Backend::Fd
        }
    }

    /// Basis vectors at a point (columns of the returned matrix).
    fn basis_at<S: Scalar>(&self, x: &[S]) -> Result<Mat<S>> {
        match self {
            Distribution::Span { basis, .. } => {
                let cols: Vec<Vec<S>> = basis.iter().map(|v| v.iter().map(|e| e.eval(x)).collect()).collect();
                Ok(Mat::from_columns(&cols))
            }
            Distribution::Transported { metric, x0, basis0 } => {
                if TypeId::of::<S>() != TypeId::of::<f64>() {
                    return Err(Error::NotDifferentiable("transported distributions are sampled pointwise".into()));
                }
                let xf = re_vec(x);
                let conn = Connection::new(metric, Backend::Dual);
                let t = transport_matrix(&conn, &axis_ray(x0, &xf), &TransportOptions::default())?;
                let cols: Vec<Vec<S>> =
                    basis0.iter().map(|b| t.mul_vec(b).into_iter().map(S::cst).collect()).collect();
                Ok(Mat::from_columns(&cols))
            }
            Distribution::Complement(_) => unreachable!("complements have no own basis"),
        }
    }

    /// `P = B (BᵀGB)⁻¹ BᵀG`, the g-orthogonal projector.
    pub fn projector<S: Scalar>(&self, x: &[S]) -> Result<Mat<S>> {
        match self {
            Distribution::Complement(inner) => {
                let p = inner.projector(x)?;
                Ok(Mat::identity(p.rows()).sub(&p))
            }
            _ => {
                let b = self.basis_at(x)?;
                let g = self.metric().matrix(x);
                let bt_g = b.transpose().mul(&g);
                let gram = bt_g.mul(&b);
                Ok(b.mul(&gram.inverse()?).mul(&bt_g))
            }
        }
    }

    pub fn projector_at(&self, x: &[f64]) -> Result<Mat<f64>> {
        let x = self.metric().dom().wrap(x)?;
        self.projector(&x)
    }

    /// g-orthonormal basis of the subspace at `x`.
    pub fn orthonormal_basis(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let p = self.projector_at(x)?;
        range_basis(&p, &self.metric().matrix(x), self.rank())
    }

    /// g-orthonormal basis of the complement at `x`.
    pub fn complement_basis(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.complement().orthonormal_basis(x)
    }

    /// Largest defect among `P² = P`, `GP = (GP)ᵀ` and `tr P = rank`.
    pub fn projector_defect(&self, x: &[f64]) -> Result<f64> {
        let p = self.projector_at(x)?;
        let g = self.metric().matrix_at(x)?;
        let gp = g.mul(&p);
        Ok(p.mul(&p)
            .sub(&p)
            .max_abs()
            .max(gp.sub(&gp.transpose()).max_abs())
            .max((p.trace() - self.rank() as f64).abs()))
    }
}

/// Gram–Schmidt on `P e_i`, keeping `rank` vectors with the largest remaining norm.
fn range_basis(p: &Mat<f64>, g: &Mat<f64>, rank: usize) -> Result<Vec<Vec<f64>>> {
    let n = p.rows();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(rank);
    let mut pool: Vec<Vec<f64>> = (0..n).map(|i| p.column(i)).collect();
    while out.len() < rank {
        let mut best = (0, 0.0);
        for (i, v) in pool.iter().enumerate() {
            let nv = g.bilinear(v, v);
            if nv > best.1 {
                best = (i, nv);
            }
        }
        if best.1 < 1e-20 {
            return Err(Error::RankMismatch(format!("projector has rank below {rank}")));
        }
        let s = best.1.sqrt();
        let e: Vec<f64> = pool[best.0].iter().map(|v| v / s).collect();
        for v in pool.iter_mut() {
            let c = g.bilinear(&e, v);
            for (vi, ei) in v.iter_mut().zip(&e) {
                *vi -= c * ei;
            }
        }
        out.push(e);
    }
    Ok(out)
}

struct ProjectorFn<'a>(&'a Distribution);

impl VectorFn for ProjectorFn<'_> {
    fn dim_out(&self) -> usize {
        self.0.dim() * self.0.dim()
    }
    fn eval<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        Ok(self.0.projector(x)?.data().to_vec())
    }
}

/// `max_m ‖∇_m P‖` with `(∇_m P)^i_j = ∂_m P^i_j + Γ^i_mk P^k_j − Γ^k_mj P^i_k`,
/// using the connection of `g`.
pub fn distribution_parallel_residual(g: &MetricField, d: &Distribution, x: &[f64], backend: Backend) -> Result<f64> {
    let n = g.dim();
    if d.dim() != n {
        return Err(Error::RankMismatch("distribution and metric dimensions differ".into()));
    }
    let x = g.dom().wrap(x)?;
    let geo = LocalGeometry::at(g, &x, 1, &Ctx::new(g.dom(), backend))?;
    let pctx = Ctx::new(g.dom(), d.derivative_backend(backend));
    let js = jets(&ProjectorFn(d), &x, 1, &pctx)?;
    let p = Mat::from_fn(n, n, |i, j| js[i * n + j].value);
    let mut worst: f64 = 0.0;
    for m in 0..n {
        let mut e = vec![0.0; n];
        e[m] = 1.0;
        let gm = geo.gamma_along(&e);
        let dp = Mat::from_fn(n, n, |i, j| js[i * n + j].d1[m]);
        let cov = dp.add(&gm.mul(&p)).sub(&p.mul(&gm));
        worst = worst.max(cov.op_norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::ChartDomain;
    use crate::expr::parse;

    #[test]
    fn coordinate_axis_is_parallel_in_flat_space() {
        let g = MetricField::flat(ChartDomain::cube(3, 1.0, 4).unwrap());
        let d = Distribution::coordinate_block(&g, &[0]);
        assert_eq!(distribution_parallel_residual(&g, &d, &[0.1, 0.2, 0.3], Backend::Dual).unwrap(), 0.0);
        assert!(d.projector_defect(&[0.1, 0.2, 0.3]).unwrap() < 1e-14);
    }

    #[test]
    fn warped_fibre_is_not_parallel_but_base_line_is() {
        let dom = ChartDomain::cube(2, 1.0, 4).unwrap();
        let names = vec!["t".to_string(), "y".to_string()];
        let g = MetricField::diagonal(dom, vec![Expr::one(), parse("exp(-2*t)", &names).unwrap()]).unwrap();
        let t_line = Distribution::coordinate_block(&g, &[0]);
        let y_line = Distribution::coordinate_block(&g, &[1]);
        // Lines in a 2D warped product: the t-lines are geodesic but the y-lines bend.
        assert!(distribution_parallel_residual(&g, &t_line, &[0.2, 0.0], Backend::Dual).unwrap() > 0.1);
        assert!(distribution_parallel_residual(&g, &y_line, &[0.2, 0.0], Backend::Dual).unwrap() > 0.1);
    }

    #[test]
    fn product_factor_is_parallel() {
        let dom = ChartDomain::cube(3, 1.0, 4).unwrap();
        let names = crate::expr::default_names(3);
        let g = MetricField::diagonal(dom, vec![parse("2+sin(x)", &names).unwrap(), Expr::one(), parse("exp(y)", &names).unwrap()])
            .unwrap();
        let d = Distribution::coordinate_block(&g, &[0]);
        assert!(distribution_parallel_residual(&g, &d, &[0.1, 0.2, 0.3], Backend::Dual).unwrap() < 1e-14);
        let c = d.complement();
        assert_eq!(c.rank(), 2);
        assert!(distribution_parallel_residual(&g, &c, &[0.1, 0.2, 0.3], Backend::Dual).unwrap() < 1e-14);
    }
}
