//! Triple warped products `g = g₁ + g₂ + e^{−2φ}g₃` and their conformal partners.
//!
//! Factors carry their own coordinates; [`build`] concatenates them into one
//! product chart in the order (factor 1, factor 2, factor 3). The partner
//! `g̃ = e^{2φ}(g₁ + g₂) + g₃` is assembled block by block, so it agrees with
//! the swapped construction of [`conjugate_identity_check`] bit for bit.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::chart::{Backend, ChartDomain, Ctx, ScalarField};
use crate::curvature::MetricField;
use crate::error::{Error, Result};
use crate::exterior::{distribution_volume_form, Form};
use crate::curvature::grad_laplace;
use crate::expr::Expr;
use crate::holonomy::{classify, distribution_parallel_residual, ClassifyOptions, Distribution, HolonomyLabel};
use crate::linalg::Mat;

/// One factor: a coordinate box of any positive dimension and a metric on it.
#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub periodic: Vec<bool>,
    /// Components in the factor's own coordinates `0..dim`.
    pub metric: Vec<Vec<Expr>>,
}

impl Factor {
    pub fn flat_box(n: usize, half: f64) -> Self {
        let metric = (0..n).map(|i| (0..n).map(|j| Expr::c(if i == j { 1.0 } else { 0.0 })).collect()).collect();
        Factor { lo: vec![-half; n], hi: vec![half; n], periodic: vec![false; n], metric }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    fn check(&self, which: usize) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(Error::DimensionMismatch(format!("factor {which} has dimension 0")));
        }
        if self.hi.len() != n || self.periodic.len() != n {
            return Err(Error::DimensionMismatch(format!("factor {which}: per-axis arrays differ in length")));
        }
        if self.metric.len() != n || self.metric.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(format!("factor {which}: metric needs {n}x{n} components")));
        }
        if let Some(v) = self.metric.iter().flatten().filter_map(Expr::max_var).max() {
            if v >= n {
                return Err(Error::DimensionMismatch(format!("factor {which}: metric uses coordinate {v}")));
            }
        }
        if self.lo.iter().zip(&self.hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidChart(format!("factor {which}: empty axis")));
        }
        Ok(())
    }

    fn block(&self, offset: usize, i: usize, j: usize) -> Expr {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.metric[a][b].shift_vars(offset)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TripleWarpedSpec {
    pub factors: [Factor; 3],
    /// Warping function in the coordinates of factor 2.
    pub phi: Expr,
    /// Sweep resolution per axis of the product chart.
    pub grid_res: usize,
}

impl TripleWarpedSpec {
    pub fn dims(&self) -> [usize; 3] {
        [self.factors[0].dim(), self.factors[1].dim(), self.factors[2].dim()]
    }

    /// All three factors flat boxes `[-half, half]`.
    pub fn flat(dims: [usize; 3], half: f64, phi: Expr) -> Self {
        TripleWarpedSpec { factors: dims.map(|n| Factor::flat_box(n, half)), phi, grid_res: 4 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TripleWarpedPair {
    pub spec: TripleWarpedSpec,
    pub g: MetricField,
    pub tilde: MetricField,
    /// Warping function in product coordinates.
    pub phi: ScalarField,
    pub t1: Distribution,
    pub t2: Distribution,
    pub t3: Distribution,
}

impl TripleWarpedPair {
    pub fn dims(&self) -> [usize; 3] {
        self.spec.dims()
    }

    pub fn dom(&self) -> &ChartDomain {
        self.g.dom()
    }

    /// `T₁ ⊕ T₂` as one coordinate block.
    pub fn t12(&self) -> Distribution {
        let [n1, n2, _] = self.dims();
        Distribution::coordinate_block(&self.g, &(0..n1 + n2).collect::<Vec<_>>())
    }
}

fn ranges(dims: [usize; 3]) -> [std::ops::Range<usize>; 3] {
    let [a, b, c] = dims;
    [0..a, a..a + b, a + b..a + b + c]
}

/// Block-diagonal assembly: factor `k` placed at `offsets[k]`, its block multiplied by `weights[k]`.
fn assemble(factors: [&Factor; 3], weights: [Option<&Expr>; 3], offsets: [usize; 3], n: usize) -> Vec<Vec<Expr>> {
    let mut comps = vec![vec![Expr::zero(); n]; n];
    for k in 0..3 {
        let f = factors[k];
        let off = offsets[k];
        for i in 0..f.dim() {
            for j in 0..f.dim() {
                let b = f.block(off, i, j);
                comps[off + i][off + j] = match weights[k] {
                    Some(w) => Expr::mul(w.clone(), b),
                    None => b,
                };
            }
        }
    }
    comps
}

pub fn build(spec: &TripleWarpedSpec) -> Result<TripleWarpedPair> {
    for (k, f) in spec.factors.iter().enumerate() {
        f.check(k + 1)?;
    }
    let dims = spec.dims();
    let [n1, n2, n3] = dims;
    let n = n1 + n2 + n3;
    if let Some(v) = spec.phi.max_var() {
        if v >= n2 {
            return Err(Error::DimensionMismatch(format!("warping function uses coordinate {v}, factor 2 has {n2}")));
        }
    }
    if !(0..n2).any(|i| spec.phi.depends_on(i)) {
        return Err(Error::ConstantWarping);
    }
    let lo: Vec<f64> = spec.factors.iter().flat_map(|f| f.lo.clone()).collect();
    let hi: Vec<f64> = spec.factors.iter().flat_map(|f| f.hi.clone()).collect();
    let periodic: Vec<bool> = spec.factors.iter().flat_map(|f| f.periodic.clone()).collect();
    let dom = ChartDomain::new(lo, hi, periodic, vec![spec.grid_res; n])?;

    let phi = spec.phi.shift_vars(n1);
    let sample = dom.grid_points();
    let varies = sample.iter().any(|x| {
        (0..n).any(|i| phi.diff(i).eval(x).abs() > 1e-12)
    });
    if !varies {
        return Err(Error::ConstantWarping);
    }

    let down = Expr::exp(Expr::scale(-2.0, phi.clone()));
    let up = Expr::exp(Expr::scale(2.0, phi.clone()));
    let [f1, f2, f3] = &spec.factors;
    let offsets = [0, n1, n1 + n2];
    let g = MetricField::new(dom.clone(), assemble([f1, f2, f3], [None, None, Some(&down)], offsets, n))?;
    let tilde = MetricField::new(dom, assemble([f1, f2, f3], [Some(&up), Some(&up), None], offsets, n))?;
    g.validate()?;
    tilde.validate()?;

    let [r1, r2, r3] = ranges(dims);
    let block = |r: std::ops::Range<usize>| Distribution::coordinate_block(&g, &r.collect::<Vec<_>>());
    Ok(TripleWarpedPair {
        spec: spec.clone(),
        phi: ScalarField::new(phi),
        t1: block(r1),
        t2: block(r2),
        t3: block(r3),
        g,
        tilde,
    })
}

/// `max |e^{2φ}g − ĝ|` over the sweep grid, where `ĝ` is the triple warped product of
/// `(g₃, e^{2φ}g₂, g₁)` with warping `−φ`, assembled independently in swapped
/// coordinates and mapped back.
pub fn conjugate_identity_check(pair: &TripleWarpedPair) -> f64 {
    let [n1, n2, n3] = pair.dims();
    let n = n1 + n2 + n3;
    let [f1, f2, f3] = &pair.spec.factors;
    // Swapped chart: (factor 3, factor 2, factor 1).
    let to_product = move |v: usize| -> usize {
        if v < n3 {
            n1 + n2 + v
        } else if v < n3 + n2 {
            n1 + (v - n3)
        } else {
            v - n3 - n2
        }
    };
    let phi_swapped = pair.spec.phi.shift_vars(n3);
    let minus_phi = Expr::neg(phi_swapped.clone());
    let middle_weight = Expr::exp(Expr::scale(2.0, phi_swapped));
    let middle = Factor {
        metric: (0..n2)
            .map(|i| (0..n2).map(|j| Expr::mul(middle_weight.clone(), f2.block(n3, i, j)).remap_vars(&|v| v - n3)).collect())
            .collect(),
        ..f2.clone()
    };
    let down = Expr::exp(Expr::scale(-2.0, minus_phi));
    let swapped = assemble([f3, &middle, f1], [None, None, Some(&down)], [0, n3, n3 + n2], n);
    let inverse = |p: usize| -> usize {
        (0..n).find(|&v| to_product(v) == p).expect("permutation")
    };
    let mut worst: f64 = 0.0;
    for x in pair.dom().grid_points() {
        let t = pair.tilde.matrix(&x);
        for i in 0..n {
            for j in 0..n {
                let e = swapped[inverse(i)][inverse(j)].remap_vars(&to_product);
                worst = worst.max((t[(i, j)] - e.eval(&x)).abs());
            }
        }
    }
    worst
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducibilityCertificate {
    /// `max ‖∇ᵍP₁‖` over the sweep grid.
    pub res_g: f64,
    /// `max ‖∇^{g̃}P₃‖` over the sweep grid.
    pub res_tilde: f64,
    pub hol_g: HolonomyLabel,
    pub hol_tilde: HolonomyLabel,
}

pub fn reducibility_certificate(pair: &TripleWarpedPair, opts: &ClassifyOptions) -> Result<ReducibilityCertificate> {
    let t3 = pair.t3.with_metric(&pair.tilde);
    let mut res_g: f64 = 0.0;
    let mut res_tilde: f64 = 0.0;
    for x in pair.dom().grid_points() {
        res_g = res_g.max(distribution_parallel_residual(&pair.g, &pair.t1, &x, opts.backend)?);
        res_tilde = res_tilde.max(distribution_parallel_residual(&pair.tilde, &t3, &x, opts.backend)?);
    }
    let x0 = pair.dom().center();
    let hol_g = classify(&pair.g, &x0, opts)?.label;
    let hol_tilde = classify(&pair.tilde, &x0, opts)?.label;
    Ok(ReducibilityCertificate { res_g, res_tilde, hol_g, hol_tilde })
}

/// Tolerance on `g̃ = e^{2φ}g` accepted by [`recover_factors`].
pub const CONFORMAL_TOL: f64 = 1e-10;
/// Tolerance on the angle defect between `T₁` and `T₃`.
pub const ORTHOGONAL_TOL: f64 = 1e-4;

/// Pointwise factor tensors in product coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorTensors {
    pub g1: Mat<f64>,
    pub g2: Mat<f64>,
    pub g3: Mat<f64>,
    /// `g₂` from the other side of the recovery identity.
    pub g2_alt: Mat<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Recovery {
    pub points: Vec<Vec<f64>>,
    pub tensors: Vec<FactorTensors>,
    /// `max ‖g − (g₁ + g₂ + e^{−2φ}g₃)‖`.
    pub reconstruction: f64,
    /// `max ‖(g₂₃ − e^{−2φ}g₃) − (e^{−2φ}g₁₂ − g₁)‖`.
    pub route_defect: f64,
    /// `max ‖g₂|_{T₁⊕T₃}‖`.
    pub vanishing_defect: f64,
    /// Smallest eigenvalue of `g₂` on a g-orthonormal basis of `T₂`.
    pub t2_min_eigenvalue: f64,
    pub orthogonality_defect: f64,
    pub conformal_defect: f64,
}

fn g_orthonormal_basis(p: &Mat<f64>, g: &Mat<f64>, rank: usize) -> Vec<Vec<f64>> {
    let svd = p.to_na().svd(true, false);
    let u = svd.u.expect("requested left singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(rank);
    for &k in order.iter().take(rank) {
        let mut v: Vec<f64> = u.column(k).iter().copied().collect();
        for e in &out {
            let c = g.bilinear(e, &v);
            for (vi, ei) in v.iter_mut().zip(e) {
                *vi -= c * ei;
            }
        }
        let s = g.bilinear(&v, &v).sqrt();
        out.push(v.into_iter().map(|c| c / s).collect());
    }
    out
}

/// Recover `(g₁, g₂, g₃)` from the two metrics, a g-parallel `T₁`, a g̃-parallel `T₃` and `φ`,
/// at each of `points`.
pub fn recover_factors(
    g: &MetricField,
    tilde: &MetricField,
    t1: &Distribution,
    t3: &Distribution,
    phi: &ScalarField,
    points: &[Vec<f64>],
) -> Result<Recovery> {
    let n = g.dim();
    if tilde.dim() != n || t1.dim() != n || t3.dim() != n {
        return Err(Error::DimensionMismatch("metrics and distributions live in different dimensions".into()));
    }
    let t3 = t3.with_metric(tilde);
    let (k1, k3) = (t1.rank(), t3.rank());
    if k1 + k3 >= n {
        return Err(Error::RankMismatch(format!("ranks {k1} + {k3} leave no middle factor in dimension {n}")));
    }
    let id = Mat::identity(n);
    let mut out = Recovery {
        points: points.to_vec(),
        tensors: Vec::with_capacity(points.len()),
        reconstruction: 0.0,
        route_defect: 0.0,
        vanishing_defect: 0.0,
        t2_min_eigenvalue: f64::INFINITY,
        orthogonality_defect: 0.0,
        conformal_defect: 0.0,
    };
    for x in points {
        let x = g.dom().wrap(x)?;
        let gm = g.matrix(&x);
        let gt = tilde.matrix(&x);
        let e2 = (2.0 * phi.value(&x)).exp();
        let conf = gt.sub(&gm.scale_by(&e2)).op_norm() / (1.0 + gt.op_norm());
        if conf > CONFORMAL_TOL {
            return Err(Error::NotConformal { defect: conf });
        }
        out.conformal_defect = out.conformal_defect.max(conf);

        let p1 = t1.projector(&x)?;
        let p3 = t3.projector(&x)?;
        let b1 = t1.orthonormal_basis(&x)?;
        let b3 = t3.orthonormal_basis(&x)?;
        let mut angle: f64 = 0.0;
        for u in &b1 {
            for v in &b3 {
                // b3 is g̃-orthonormal; rescale to g-unit length.
                angle = angle.max((gm.bilinear(u, v) * e2.sqrt()).abs());
            }
        }
        if angle > ORTHOGONAL_TOL {
            return Err(Error::NotOrthogonal { defect: angle });
        }
        out.orthogonality_defect = out.orthogonality_defect.max(angle);

        let q1 = id.sub(&p1);
        let q3 = id.sub(&p3);
        let g1 = p1.transpose().mul(&gm).mul(&p1);
        let g3 = p3.transpose().mul(&gt).mul(&p3);
        let g23 = q1.transpose().mul(&gm).mul(&q1);
        let g12 = q3.transpose().mul(&gt).mul(&q3);
        let em2 = 1.0 / e2;
        let g2 = g23.sub(&g3.scale_by(&em2));
        let g2_alt = g12.scale_by(&em2).sub(&g1);

        let rebuilt = g1.add(&g2).add(&g3.scale_by(&em2));
        out.reconstruction = out.reconstruction.max(gm.sub(&rebuilt).max_abs());
        out.route_defect = out.route_defect.max(g2.sub(&g2_alt).max_abs());
        let p13 = p1.add(&p3);
        out.vanishing_defect = out.vanishing_defect.max(g2.mul(&p13).max_abs());

        let q13 = id.sub(&p13);
        let b2 = g_orthonormal_basis(&q13, &gm, n - k1 - k3);
        let m = DMatrix::from_fn(b2.len(), b2.len(), |a, b| g2.bilinear(&b2[a], &b2[b]));
        let lam = SymmetricEigen::new(m).eigenvalues.iter().fold(f64::INFINITY, |a, &v| a.min(v));
        out.t2_min_eigenvalue = out.t2_min_eigenvalue.min(lam);
        out.tensors.push(FactorTensors { g1, g2, g3, g2_alt });
    }
    Ok(out)
}

/// `max` over recovered points of the difference between the recovered factor tensors and
/// the factor metrics of `pair`, block by block.
pub fn input_defect(pair: &TripleWarpedPair, rec: &Recovery) -> f64 {
    let dims = pair.dims();
    let rs = ranges(dims);
    let mut worst: f64 = 0.0;
    for (x, t) in rec.points.iter().zip(&rec.tensors) {
        let blocks = [&t.g1, &t.g2, &t.g3];
        for k in 0..3 {
            let f = &pair.spec.factors[k];
            let local: Vec<f64> = x[rs[k].clone()].to_vec();
            for (a, i) in rs[k].clone().enumerate() {
                for (b, j) in rs[k].clone().enumerate() {
                    let want = if a <= b { f.metric[a][b].eval(&local) } else { f.metric[b][a].eval(&local) };
                    worst = worst.max((blocks[k][(i, j)] - want).abs());
                }
            }
            // Off-block entries of each factor tensor must vanish.
            for i in 0..x.len() {
                for j in 0..x.len() {
                    if !(rs[k].contains(&i) && rs[k].contains(&j)) {
                        worst = worst.max(blocks[k][(i, j)].abs());
                    }
                }
            }
        }
    }
    worst
}

/// Per-point alignment record between the warping gradient and the factor distributions.
#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    /// `|dφ ∧ ω₁₂|` with `ω₁₂` the volume form of `T₁₂`.
    pub dphi_wedge_t12: f64,
    /// `|dφ ∧ ω₁|` with `ω₁` the volume form of `T₁`.
    pub dphi_wedge_t1: f64,
    /// `dist(grad φ, T₃)`, relative to `|grad φ|`.
    pub m1_defect: f64,
    /// `dist(grad φ, T₁₂)`, relative to `|grad φ|`.
    pub m2_defect: f64,
    /// Sine of the largest principal angle between `T₁` and `T₃` (zero iff `T₁ ⊂ T₃`).
    pub c1_defect: f64,
    /// Same for `T₁ ⊂ T₁₂`.
    pub c2_defect: f64,
    /// `|dφ|` over `T₃`-directions.
    pub dphi_on_t3: f64,
}

/// The inputs of [`alignment_diagnostics`].
pub struct AlignmentInput<'a> {
    pub g: &'a MetricField,
    pub t1: &'a Distribution,
    pub t12: &'a Distribution,
    pub t3: &'a Distribution,
    pub phi: &'a ScalarField,
}

fn inclusion_defect(sub: &[Vec<f64>], p: &Mat<f64>, g: &Mat<f64>) -> f64 {
    let n = g.rows();
    let q = Mat::identity(n).sub(p);
    let w: Vec<Vec<f64>> = sub.iter().map(|u| q.mul_vec(u)).collect();
    let m = DMatrix::from_fn(w.len(), w.len(), |a, b| g.bilinear(&w[a], &w[b]));
    SymmetricEigen::new(m).eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v)).max(0.0).sqrt()
}

pub fn alignment_diagnostics(input: &AlignmentInput, x: &[f64], backend: Backend) -> Result<Alignment> {
    let g = input.g;
    let n = g.dim();
    for d in [input.t1, input.t12, input.t3] {
        if d.dim() != n {
            return Err(Error::RankMismatch(format!("distribution in dimension {} on a {n}-dimensional chart", d.dim())));
        }
    }
    if input.t12.rank() + input.t3.rank() != n {
        return Err(Error::RankMismatch("T12 and T3 ranks do not add up to the dimension".into()));
    }
    let x = g.dom().wrap(x)?;
    let gm = g.matrix(&x);
    let gl = grad_laplace(g, input.phi, &x, &Ctx::new(g.dom(), backend))?;
    let ginv = gm.inverse()?;
    let dphi = Form::one_form(gl.dphi.clone());
    let w12 = dphi.wedge(&distribution_volume_form(g, input.t12, &x)?)?.norm(&ginv);
    let w1 = dphi.wedge(&distribution_volume_form(g, input.t1, &x)?)?.norm(&ginv);

    let grad = &gl.grad;
    let gnorm = gm.bilinear(grad, grad).sqrt().max(1e-300);
    let p3 = input.t3.projector(&x)?;
    let p12 = input.t12.projector(&x)?;
    let dist = |p: &Mat<f64>| {
        let r: Vec<f64> = grad.iter().zip(p.mul_vec(grad)).map(|(a, b)| a - b).collect();
        gm.bilinear(&r, &r).sqrt() / gnorm
    };
    let b1 = input.t1.orthonormal_basis(&x)?;
    let b3 = input.t3.orthonormal_basis(&x)?;
    let dphi_on_t3 = b3.iter().map(|v| gl.dphi.iter().zip(v).map(|(a, b)| a * b).sum::<f64>().abs()).fold(0.0, f64::max);
    Ok(Alignment {
        dphi_wedge_t12: w12,
        dphi_wedge_t1: w1,
        m1_defect: dist(&p3),
        m2_defect: dist(&p12),
        c1_defect: inclusion_defect(&b1, &p3, &gm),
        c2_defect: inclusion_defect(&b1, &p12, &gm),
        dphi_on_t3,
    })
}

/// Alignment record at `x` for a built pair.
pub fn pair_alignment(pair: &TripleWarpedPair, x: &[f64], backend: Backend) -> Result<Alignment> {
    let t12 = pair.t12();
    let input = AlignmentInput { g: &pair.g, t1: &pair.t1, t12: &t12, t3: &pair.t3, phi: &pair.phi };
    alignment_diagnostics(&input, x, backend)
}

/// `T₁` and `T₃` found by holonomy analysis of `g` and `g̃` rather than by construction.
#[derive(Clone, Debug)]
pub struct DetectedSplit {
    pub t1: Distribution,
    pub t3: Distribution,
    /// Angle defect between the selected subspaces at the base point.
    pub base_angle: f64,
}

fn subsets(k: usize) -> impl Iterator<Item = Vec<usize>> {
    (1u32..(1 << k)).map(move |mask| (0..k).filter(|&i| mask & (1 << i) != 0).collect())
}

/// Pick unions of `g`-invariant and `g̃`-invariant subspaces of ranks `(n₁, n₃)` that are
/// closest to g-orthogonal at the base point.
pub fn detect_split(pair: &TripleWarpedPair, opts: &ClassifyOptions) -> Result<DetectedSplit> {
    let [n1, _, n3] = pair.dims();
    let x0 = pair.dom().center();
    let cg = classify(&pair.g, &x0, opts)?;
    let ct = classify(&pair.tilde, &x0, opts)?;
    let gm = pair.g.matrix_at(&x0)?;
    let bases = |c: &crate::holonomy::HolonomyClassification| -> Vec<Vec<Vec<f64>>> {
        c.invariant_distributions
            .iter()
            .map(|d| match d {
                Distribution::Transported { basis0, .. } => basis0.clone(),
                _ => unreachable!("classification returns transported distributions"),
            })
            .collect()
    };
    let (bg, bt) = (bases(&cg), bases(&ct));
    if bg.len() > 12 || bt.len() > 12 {
        return Err(Error::RankMismatch("too many invariant subspaces to search".into()));
    }
    let mut best: Option<(f64, Vec<Vec<f64>>, Vec<Vec<f64>>)> = None;
    for s in subsets(bg.len()) {
        let u: Vec<Vec<f64>> = s.iter().flat_map(|&i| bg[i].clone()).collect();
        if u.len() != n1 {
            continue;
        }
        for t in subsets(bt.len()) {
            let v: Vec<Vec<f64>> = t.iter().flat_map(|&i| bt[i].clone()).collect();
            if v.len() != n3 {
                continue;
            }
            let mut angle: f64 = 0.0;
            for a in &u {
                for b in &v {
                    let c = gm.bilinear(a, b) / (gm.bilinear(a, a) * gm.bilinear(b, b)).sqrt();
                    angle = angle.max(c.abs());
                }
            }
            if best.as_ref().map_or(true, |(e, _, _)| angle < *e) {
                best = Some((angle, u.clone(), v));
            }
        }
    }
    let (base_angle, u, v) =
        best.ok_or_else(|| Error::RankMismatch(format!("no invariant subspaces of ranks ({n1}, {n3})")))?;
    Ok(DetectedSplit {
        t1: Distribution::Transported { metric: pair.g.clone(), x0: x0.clone(), basis0: u },
        t3: Distribution::Transported { metric: pair.tilde.clone(), x0, basis0: v },
        base_angle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn example() -> TripleWarpedPair {
        build(&TripleWarpedSpec::flat([1, 1, 2], 1.0, Expr::sin(Expr::var(0)))).unwrap()
    }

    #[test]
    fn example_metric_has_expected_components() {
        let pair = example();
        let x = [0.1, 0.3, -0.2, 0.4];
        let g = pair.g.matrix(&x);
        let w = (-2.0 * 0.3f64.sin()).exp();
        assert_eq!(g[(0, 0)], 1.0);
        assert_eq!(g[(1, 1)], 1.0);
        assert!((g[(2, 2)] - w).abs() < 1e-15 && (g[(3, 3)] - w).abs() < 1e-15);
        assert_eq!(g[(0, 2)], 0.0);
    }

    #[test]
    fn conjugate_identity_is_exact() {
        assert_eq!(conjugate_identity_check(&example()), 0.0);
    }

    #[test]
    fn constant_warping_is_rejected() {
        let spec = TripleWarpedSpec::flat([1, 1, 1], 1.0, Expr::c(0.3));
        assert_eq!(build(&spec), Err(Error::ConstantWarping));
        let spec = TripleWarpedSpec::flat([1, 1, 1], 1.0, parse("sin(x)^2 + cos(x)^2", &["x".to_string()]).unwrap());
        assert!(matches!(build(&spec), Err(Error::ConstantWarping)));
    }

    #[test]
    fn warping_outside_middle_factor_is_rejected() {
        let spec = TripleWarpedSpec::flat([1, 1, 1], 1.0, Expr::var(1));
        assert!(matches!(build(&spec), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn round_trip_recovers_inputs() {
        let pair = example();
        let pts = pair.dom().grid_points();
        let rec = recover_factors(&pair.g, &pair.tilde, &pair.t1, &pair.t3, &pair.phi, &pts).unwrap();
        assert!(rec.reconstruction < 1e-10);
        assert!(rec.route_defect < 1e-10);
        assert!(rec.vanishing_defect < 1e-12);
        assert!(rec.t2_min_eigenvalue > 0.5);
        assert!(input_defect(&pair, &rec) < 1e-10);
    }

    #[test]
    fn shifted_warping_is_not_conformal() {
        let pair = example();
        let wrong = ScalarField::new(Expr::add(pair.phi.expr.clone(), Expr::c(0.1)));
        let err = recover_factors(&pair.g, &pair.tilde, &pair.t1, &pair.t3, &wrong, &[pair.dom().center()]);
        assert!(matches!(err, Err(Error::NotConformal { .. })));
    }

    #[test]
    fn overlapping_distributions_are_not_orthogonal() {
        let pair = example();
        let tilted = Distribution::Span {
            metric: pair.g.clone(),
            basis: vec![vec![Expr::one(), Expr::zero(), Expr::c(0.5), Expr::zero()]],
        };
        let err = recover_factors(&pair.g, &pair.tilde, &tilted, &pair.t3, &pair.phi, &[pair.dom().center()]);
        assert!(matches!(err, Err(Error::NotOrthogonal { .. })));
    }

    #[test]
    fn alignment_of_built_pair() {
        let pair = example();
        let a = pair_alignment(&pair, &[0.1, 0.3, -0.2, 0.4], Backend::Dual).unwrap();
        assert!(a.dphi_wedge_t12 < 1e-12);
        assert!(a.m2_defect < 1e-12);
        assert_eq!(a.dphi_on_t3, 0.0);
        assert!(a.c2_defect < 1e-12);
        assert!((a.c1_defect - 1.0).abs() < 1e-12);
    }
}
