//! Parallel transport along piecewise-smooth curves.
//!
//! The transport matrix `P` solves `dP/dt = −Γ(ẋ) P`, `P(0) = I`, integrated
//! piece by piece with classical RK4 and step-doubling error control.

use serde::{Deserialize, Serialize};

use crate::chart::{Backend, Ctx};
use crate::curvature::{LocalGeometry, MetricField};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::linalg::Mat;

/// One smooth piece of a curve, parametrised by `t ∈ [0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Piece {
    Segment { a: Vec<f64>, b: Vec<f64> },
    /// `x(t) = x0 + Σ_k a_k (cos 2πkt − 1) + b_k sin 2πkt`, closed at `x0`.
    Fourier { x0: Vec<f64>, a: Vec<Vec<f64>>, b: Vec<Vec<f64>> },
}

impl Piece {
    pub fn point(&self, t: f64) -> Vec<f64> {
        match self {
            Piece::Segment { a, b } => a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect(),
            Piece::Fourier { x0, a, b } => {
                let mut x = x0.clone();
                for (k, (ak, bk)) in a.iter().zip(b).enumerate() {
                    let w = 2.0 * std::f64::consts::PI * (k + 1) as f64;
                    let (s, c) = (w * t).sin_cos();
                    for i in 0..x.len() {
                        x[i] += ak[i] * (c - 1.0) + bk[i] * s;
                    }
                }
                x
            }
        }
    }

    pub fn velocity(&self, t: f64) -> Vec<f64> {
        match self {
            Piece::Segment { a, b } => a.iter().zip(b).map(|(p, q)| q - p).collect(),
            Piece::Fourier { x0, a, b } => {
                let mut v = vec![0.0; x0.len()];
                for (k, (ak, bk)) in a.iter().zip(b).enumerate() {
                    let w = 2.0 * std::f64::consts::PI * (k + 1) as f64;
                    let (s, c) = (w * t).sin_cos();
                    for i in 0..v.len() {
                        v[i] += w * (-ak[i] * s + bk[i] * c);
                    }
                }
                v
            }
        }
    }

    fn scaled_about(&self, c: &[f64], f: f64) -> Piece {
        let sc = |p: &[f64]| p.iter().zip(c).map(|(v, o)| o + f * (v - o)).collect::<Vec<_>>();
        match self {
            Piece::Segment { a, b } => Piece::Segment { a: sc(a), b: sc(b) },
            Piece::Fourier { x0, a, b } => Piece::Fourier {
                x0: sc(x0),
                a: a.iter().map(|v| v.iter().map(|z| z * f).collect()).collect(),
                b: b.iter().map(|v| v.iter().map(|z| z * f).collect()).collect(),
            },
        }
    }
}

/// A piecewise-smooth curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub pieces: Vec<Piece>,
}

impl Path {
    pub fn segment(a: Vec<f64>, b: Vec<f64>) -> Self {
        Path { pieces: vec![Piece::Segment { a, b }] }
    }

    pub fn polyline(points: &[Vec<f64>]) -> Self {
        Path {
            pieces: points.windows(2).map(|w| Piece::Segment { a: w[0].clone(), b: w[1].clone() }).collect(),
        }
    }

    /// Closed coordinate rectangle with signed sides `si` along axis `i` and `sj` along `j`.
    pub fn rectangle(x0: &[f64], i: usize, j: usize, si: f64, sj: f64) -> Self {
        let mut p1 = x0.to_vec();
        p1[i] += si;
        let mut p2 = p1.clone();
        p2[j] += sj;
        let mut p3 = x0.to_vec();
        p3[j] += sj;
        Self::polyline(&[x0.to_vec(), p1, p2, p3, x0.to_vec()])
    }

    pub fn fourier(x0: Vec<f64>, a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> Self {
        Path { pieces: vec![Piece::Fourier { x0, a, b }] }
    }

    pub fn start(&self) -> Vec<f64> {
        self.pieces[0].point(0.0)
    }

    pub fn end(&self) -> Vec<f64> {
        self.pieces.last().expect("non-empty path").point(1.0)
    }

    /// Homothety of the curve about its starting point.
    pub fn shrunk(&self, f: f64) -> Self {
        let c = self.start();
        Path { pieces: self.pieces.iter().map(|p| p.scaled_about(&c, f)).collect() }
    }

    /// Sample points (for chart containment checks).
    pub fn samples(&self, per_piece: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for p in &self.pieces {
            for k in 0..=per_piece {
                out.push(p.point(k as f64 / per_piece as f64));
            }
        }
        out
    }
}

/// Evaluates `Γ(v)` at `f64` points. With the dual backend the metric
/// derivatives are exact symbolic derivatives; with the finite-difference
/// backend they come from the stencils.
pub struct Connection<'a> {
    metric: &'a MetricField,
    dcomps: Option<Vec<Expr>>,
    ctx: Ctx,
}

impl<'a> Connection<'a> {
    pub fn new(metric: &'a MetricField, backend: Backend) -> Self {
        let n = metric.dim();
        let dcomps = (backend == Backend::Dual).then(|| {
            let mut out = Vec::with_capacity(n * n * n);
            for m in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        out.push(metric.comp(i, j).diff(m));
                    }
                }
            }
            out
        });
        Connection { metric, dcomps, ctx: metric.ctx(backend) }
    }

    pub fn metric(&self) -> &MetricField {
        self.metric
    }

    /// `(Γ(v))^k_j = Γ^k_ij v^i`.
    pub fn gamma_along(&self, x: &[f64], v: &[f64]) -> Result<Mat<f64>> {
        let n = self.metric.dim();
        let x = self.metric.dom().wrap(x)?;
        match &self.dcomps {
            Some(dc) => {
                let g = self.metric.matrix(&x);
                let ginv = g.inverse()?;
                let vals: Vec<f64> = dc.iter().map(|e| e.eval(&x)).collect();
                let dg = |m: usize, i: usize, j: usize| vals[(m * n + i) * n + j];
                let dgv = Mat::from_fn(n, n, |j, l| (0..n).map(|i| v[i] * dg(i, j, l)).sum::<f64>());
                let mut lower = Mat::zeros(n, n);
                for l in 0..n {
                    for j in 0..n {
                        let mut s = dgv[(j, l)];
                        for i in 0..n {
                            s += v[i] * (dg(j, i, l) - dg(l, i, j));
                        }
                        lower[(l, j)] = 0.5 * s;
                    }
                }
                Ok(ginv.mul(&lower))
            }
            None => Ok(LocalGeometry::at(self.metric, &x, 1, &self.ctx)?.gamma_along(v)),
        }
    }
}

/// Integration controls.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransportOptions {
    pub min_samples: usize,
    pub tol: f64,
    pub min_step: f64,
}

impl Default for TransportOptions {
    fn default() -> Self {
        TransportOptions { min_samples: 200, tol: 1e-12, min_step: 1e-9 }
    }
}

fn rhs(conn: &Connection, piece: &Piece, t: f64, p: &Mat<f64>) -> Result<Mat<f64>> {
    let x = piece.point(t);
    if !conn.metric.dom().contains(&x) {
        return Err(Error::PathEscapesChart { point: x });
    }
    let gv = conn.gamma_along(&x, &piece.velocity(t))?;
    Ok(gv.mul(p).scale_by(&-1.0))
}

fn rk4(conn: &Connection, piece: &Piece, t: f64, h: f64, p: &Mat<f64>, k1: &Mat<f64>) -> Result<Mat<f64>> {
    let k2 = rhs(conn, piece, t + 0.5 * h, &p.add(&k1.scale_by(&(0.5 * h))))?;
    let k3 = rhs(conn, piece, t + 0.5 * h, &p.add(&k2.scale_by(&(0.5 * h))))?;
    let k4 = rhs(conn, piece, t + h, &p.add(&k3.scale_by(&h)))?;
    let incr = k1.add(&k2.scale_by(&2.0)).add(&k3.scale_by(&2.0)).add(&k4);
    Ok(p.add(&incr.scale_by(&(h / 6.0))))
}

/// Transport matrix along `path`: `v(end) = P v(start)`.
pub fn transport_matrix(conn: &Connection, path: &Path, opts: &TransportOptions) -> Result<Mat<f64>> {
    let n = conn.metric.dim();
    for x in path.samples(8) {
        if !conn.metric.dom().contains(&x) {
            return Err(Error::PathEscapesChart { point: x });
        }
    }
    let mut total = Mat::identity(n);
    let h_max = 1.0 / opts.min_samples.max(1) as f64;
    for piece in &path.pieces {
        let mut p = Mat::identity(n);
        let mut t = 0.0;
        let mut h = h_max;
        while t < 1.0 - 1e-15 {
            h = h.min(1.0 - t);
            let k1 = rhs(conn, piece, t, &p)?;
            let full = rk4(conn, piece, t, h, &p, &k1)?;
            let half = rk4(conn, piece, t, 0.5 * h, &p, &k1)?;
            let k1_half = rhs(conn, piece, t + 0.5 * h, &half)?;
            let two = rk4(conn, piece, t + 0.5 * h, 0.5 * h, &half, &k1_half)?;
            let err = two.sub(&full).max_abs() / 15.0;
            let scale = opts.tol * two.max_abs().max(1.0);
            if err <= scale || h <= opts.min_step {
                if h <= opts.min_step && err > scale {
                    return Err(Error::StepSizeUnderflow { t });
                }
                p = two.add(&two.sub(&full).scale_by(&(1.0 / 15.0)));
                t += h;
                let grow = if err > 0.0 { 0.9 * (scale / err).powf(0.2) } else { 2.0 };
                h = (h * grow.clamp(0.2, 2.0)).min(h_max);
            } else {
                h *= (0.9 * (scale / err).powf(0.2)).clamp(0.1, 0.5);
            }
        }
        total = p.mul(&total);
    }
    Ok(total)
}

/// Transport a single vector.
pub fn parallel_transport(conn: &Connection, path: &Path, v0: &[f64]) -> Result<Vec<f64>> {
    Ok(transport_matrix(conn, path, &TransportOptions::default())?.mul_vec(v0))
}

/// Path from `x0` to `x` along coordinate axes, one axis at a time.
pub fn axis_ray(x0: &[f64], x: &[f64]) -> Path {
    let mut pts = vec![x0.to_vec()];
    let mut cur = x0.to_vec();
    for i in 0..x.len() {
        if (x[i] - cur[i]).abs() > 0.0 {
            cur[i] = x[i];
            pts.push(cur.clone());
        }
    }
    if pts.len() == 1 {
        pts.push(cur);
    }
    Path::polyline(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::ChartDomain;

    #[test]
    fn flat_loop_returns_identity() {
        let g = MetricField::flat(ChartDomain::cube(3, 1.0, 4).unwrap());
        let conn = Connection::new(&g, Backend::Dual);
        let path = Path::fourier(vec![0.1, 0.0, 0.0], vec![vec![0.2, 0.1, 0.0]], vec![vec![0.0, 0.3, 0.1]]);
        let p = transport_matrix(&conn, &path, &TransportOptions::default()).unwrap();
        assert!(p.sub(&Mat::identity(3)).max_abs() < 1e-12);
    }

    #[test]
    fn sphere_rectangle_rotates_by_area() {
        let dom = ChartDomain::new(vec![0.2, -3.0], vec![2.9, 3.0], vec![false, false], vec![4, 4]).unwrap();
        let s2 = MetricField::round_sphere(dom).unwrap();
        let conn = Connection::new(&s2, Backend::Dual);
        let (th0, a, b) = (0.8, 0.4, 0.5);
        let path = Path::rectangle(&[th0, 0.0], 0, 1, a, b);
        let p = transport_matrix(&conn, &path, &TransportOptions::default()).unwrap();
        let g = s2.matrix(&[th0, 0.0]);
        let e = crate::chart::coordinate_frame(&g).unwrap();
        let q = e.inverse().unwrap().mul(&p).mul(&e);
        let angle = q[(1, 0)].atan2(q[(0, 0)]).abs();
        let area = b * (th0.cos() - (th0 + a).cos());
        assert!((angle - area).abs() < 1e-6, "{angle} vs {area}");
    }

    #[test]
    fn escaping_path_is_rejected() {
        let g = MetricField::flat(ChartDomain::cube(2, 1.0, 4).unwrap());
        let conn = Connection::new(&g, Backend::Dual);
        let path = Path::segment(vec![0.0, 0.0], vec![2.0, 0.0]);
        assert!(matches!(parallel_transport(&conn, &path, &[1.0, 0.0]), Err(Error::PathEscapesChart { .. })));
    }
}
