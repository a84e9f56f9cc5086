//! Holonomy algebra from small loops, its commutant, and the resulting classification.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::{coordinate_frame, Backend, ChartDomain};
use crate::curvature::MetricField;
use crate::error::{Error, Result};
use crate::linalg::{logm, Mat};

use super::distribution::Distribution;
use super::transport::{transport_matrix, Connection, Path, TransportOptions};

/// Closed loops based at a common point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopFamily {
    pub x0: Vec<f64>,
    pub loops: Vec<Path>,
    pub samples_per_loop: usize,
}

/// Rectangle sides used by [`LoopFamily::standard`].
pub const RECTANGLE_SIDES: [f64; 3] = [0.05, 0.1, 0.2];

impl LoopFamily {
    /// A rectangle of every side in [`RECTANGLE_SIDES`] in every coordinate
    /// plane, plus `extra` random closed Fourier curves; at least 20 loops.
    /// Rectangles are flipped so that they stay inside the chart.
    pub fn standard(dom: &ChartDomain, x0: &[f64], extra: usize, seed: u64) -> Result<Self> {
        let n = dom.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut loops = Vec::new();
        let room = |i: usize, s: f64| -> f64 {
            if dom.periodic()[i] || x0[i] + s <= dom.hi()[i] {
                s
            } else {
                -s
            }
        };
        for &s in &RECTANGLE_SIDES {
            for i in 0..n {
                for j in i + 1..n {
                    loops.push(Path::rectangle(x0, i, j, room(i, s), room(j, s)));
                }
            }
        }
        let mut tries = 0;
        while loops.len() < 20 || extra > 0 && loops.len() < 3 * n * (n - 1) / 2 + extra {
            tries += 1;
            if tries > 1000 {
                return Err(Error::InvalidChart("chart too small for the loop family".into()));
            }
            let a: Vec<Vec<f64>> = (0..2).map(|_| (0..n).map(|_| rng.gen_range(-0.05..0.05)).collect()).collect();
            let b: Vec<Vec<f64>> = (0..2).map(|_| (0..n).map(|_| rng.gen_range(-0.05..0.05)).collect()).collect();
            let path = Path::fourier(x0.to_vec(), a, b);
            if path.samples(64).iter().all(|p| dom.contains(p)) {
                loops.push(path);
            }
        }
        let fam = LoopFamily { x0: x0.to_vec(), loops, samples_per_loop: 50 };
        fam.validate(dom)?;
        Ok(fam)
    }

    pub fn validate(&self, dom: &ChartDomain) -> Result<()> {
        for l in &self.loops {
            let (s, e) = (l.start(), l.end());
            let gap = s.iter().zip(&e).chain(s.iter().zip(&self.x0)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if gap > 1e-12 {
                return Err(Error::InvalidChart("loop does not start and end at the base point".into()));
            }
            if let Some(p) = l.samples(32).into_iter().find(|p| !dom.contains(p)) {
                return Err(Error::PathEscapesChart { point: p });
            }
        }
        Ok(())
    }

    pub fn shrunk(&self, f: f64) -> Self {
        LoopFamily { x0: self.x0.clone(), loops: self.loops.iter().map(|l| l.shrunk(f)).collect(), samples_per_loop: self.samples_per_loop }
    }
}

/// Sampled holonomy at a base point, in a g-orthonormal frame there.
#[derive(Clone, Debug)]
pub struct HolonomyEstimate {
    pub x0: Vec<f64>,
    /// Orthonormal frame at `x0` (columns, coordinate components).
    pub frame: Mat<f64>,
    /// Transport matrices around each loop, in the frame.
    pub transports: Vec<Mat<f64>>,
    /// Principal logarithms of the transports.
    pub generators: Vec<Mat<f64>>,
    /// Frobenius-orthonormal basis of the estimated algebra (closed under brackets).
    pub basis: Vec<Mat<f64>>,
    pub algebra_dim: usize,
    /// `max ‖QᵀQ − I‖` over transports in the frame.
    pub orthogonality_defect: f64,
    /// `max ‖A + Aᵀ‖` over generators.
    pub skew_defect: f64,
}

/// Relative singular-value cutoff for rank decisions.
pub const RANK_RTOL: f64 = 1e-5;
/// Absolute floor below which a generator set counts as zero.
pub const RANK_ATOL: f64 = 1e-9;

fn to_row(m: &Mat<f64>) -> Vec<f64> {
    m.data().to_vec()
}

/// Orthonormal basis of the span of `mats` (as `n²`-vectors), by SVD.
fn span_basis(mats: &[Mat<f64>], n: usize) -> Vec<Mat<f64>> {
    if mats.is_empty() {
        return Vec::new();
    }
    let rows: Vec<f64> = mats.iter().flat_map(to_row).collect();
    let m = DMatrix::from_row_slice(mats.len(), n * n, &rows);
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &s| a.max(s));
    let cut = (RANK_RTOL * smax).max(RANK_ATOL);
    let mut out = Vec::new();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cut {
            out.push(Mat::from_vec(n, n, vt.row(k).iter().copied().collect()));
        }
    }
    out
}

fn bracket(a: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
    a.mul(b).sub(&b.mul(a))
}

/// Smallest eigenvalue of the symmetric part; below −0.95 a rotation angle is near π.
fn min_cos(q: &Mat<f64>) -> f64 {
    let n = q.rows();
    let s = q.add(&q.transpose()).scale_by(&0.5).to_na();
    let _ = n;
    SymmetricEigen::new(s).eigenvalues.iter().fold(f64::INFINITY, |a, &v| a.min(v))
}

fn transports(g: &MetricField, fam: &LoopFamily, backend: Backend, frame: &Mat<f64>) -> Result<Vec<Mat<f64>>> {
    let conn = Connection::new(g, backend);
    let opts = TransportOptions { min_samples: fam.samples_per_loop, ..TransportOptions::default() };
    let finv = frame.inverse()?;
    fam.loops
        .par_iter()
        .map(|l| Ok(finv.mul(&transport_matrix(&conn, l, &opts)?).mul(frame)))
        .collect()
}

pub fn sample_holonomy(g: &MetricField, fam: &LoopFamily, backend: Backend) -> Result<HolonomyEstimate> {
    let n = g.dim();
    if fam.loops.len() < 20 {
        return Err(Error::InvalidChart(format!("{} loops given, at least 20 needed", fam.loops.len())));
    }
    fam.validate(g.dom())?;
    let frame = coordinate_frame(&g.matrix_at(&fam.x0)?)?;
    let mut fam = fam.clone();
    let mut qs = transports(g, &fam, backend, &frame)?;
    let worst = qs.iter().map(min_cos).fold(f64::INFINITY, f64::min);
    if worst < -0.95 {
        fam = fam.shrunk(0.5);
        qs = transports(g, &fam, backend, &frame)?;
        let worst = qs.iter().map(min_cos).fold(f64::INFINITY, f64::min);
        if worst < -0.95 {
            return Err(Error::LogBranchFailure { min_cos: worst });
        }
    }
    let id = Mat::identity(n);
    let mut generators = Vec::with_capacity(qs.len());
    let mut orthogonality_defect: f64 = 0.0;
    let mut skew_defect: f64 = 0.0;
    for q in &qs {
        orthogonality_defect = orthogonality_defect.max(q.transpose().mul(q).sub(&id).max_abs());
        let l = logm(&q.to_na()).ok_or(Error::LogBranchFailure { min_cos: min_cos(q) })?;
        let a = Mat::from_na(&l);
        skew_defect = skew_defect.max(a.add(&a.transpose()).max_abs());
        generators.push(a);
    }
    // Project onto so(n) before building the span: the symmetric part is integration noise.
    let skew: Vec<Mat<f64>> = generators.iter().map(|a| a.sub(&a.transpose()).scale_by(&0.5)).collect();
    let mut basis = span_basis(&skew, n);
    loop {
        let mut candidates = basis.clone();
        for i in 0..basis.len() {
            for j in i + 1..basis.len() {
                candidates.push(bracket(&basis[i], &basis[j]));
            }
        }
        let next = span_basis(&candidates, n);
        if next.len() <= basis.len() {
            break;
        }
        basis = next;
    }
    Ok(HolonomyEstimate {
        x0: fam.x0.clone(),
        frame,
        transports: qs,
        generators,
        algebra_dim: basis.len(),
        basis,
        orthogonality_defect,
        skew_defect,
    })
}

/// Invariant subspaces at the base point and an optional compatible complex structure.
#[derive(Clone, Debug)]
pub struct InvariantSplit {
    /// Each entry is a list of frame-coordinates vectors spanning one invariant subspace.
    pub subspaces: Vec<Vec<Vec<f64>>>,
    /// Complex structure in the frame, if the commutant contains one.
    pub complex_structure: Option<Mat<f64>>,
    /// Largest `‖(I−P) A P‖` over returned subspaces and algebra elements.
    pub invariance_defect: f64,
}

/// Null space of `X ↦ (AX − XA)_A` over the algebra basis, as matrices.
fn commutant(basis: &[Mat<f64>], n: usize) -> Vec<Mat<f64>> {
    if basis.is_empty() {
        return (0..n * n).map(|k| Mat::from_fn(n, n, |i, j| if i * n + j == k { 1.0 } else { 0.0 })).collect();
    }
    let mut rows = Vec::with_capacity(basis.len() * n * n * n * n);
    for a in basis {
        for out in 0..n * n {
            let (r, c) = (out / n, out % n);
            for k in 0..n * n {
                let (p, q) = (k / n, k % n);
                // (A E_pq − E_pq A)_rc = A_rp δ_qc − δ_rp A_qc
                let mut v = 0.0;
                if q == c {
                    v += a[(r, p)];
                }
                if r == p {
                    v -= a[(q, c)];
                }
                rows.push(v);
            }
        }
    }
    let m = DMatrix::from_row_slice(basis.len() * n * n, n * n, &rows);
    let eig = SymmetricEigen::new(m.transpose() * &m);
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v));
    let mut out = Vec::new();
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam <= 1e-12 * top.max(1.0) {
            out.push(Mat::from_vec(n, n, eig.eigenvectors.column(k).iter().copied().collect()));
        }
    }
    out
}

/// Cluster sorted eigenvalues; `None` when a gap is too ambiguous to decide.
fn clusters(vals: &[f64]) -> Option<Vec<Vec<usize>>> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let spread = vals.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let mut out: Vec<Vec<usize>> = vec![vec![idx[0]]];
    for w in idx.windows(2) {
        let gap = (vals[w[1]] - vals[w[0]]) / spread;
        if gap > 1e-3 {
            out.push(vec![w[1]]);
        } else if gap > 1e-7 {
            return None;
        } else {
            out.last_mut().expect("non-empty").push(w[1]);
        }
    }
    Some(out)
}

pub fn invariant_subspaces(est: &HolonomyEstimate, seed: u64) -> Result<InvariantSplit> {
    let n = est.frame.rows();
    if est.algebra_dim == 0 {
        let lines = (0..n).map(|a| vec![(0..n).map(|i| if i == a { 1.0 } else { 0.0 }).collect()]).collect();
        return Ok(InvariantSplit { subspaces: lines, complex_structure: None, invariance_defect: 0.0 });
    }
    let comm = commutant(&est.basis, n);
    let sym: Vec<Mat<f64>> = comm.iter().map(|c| c.add(&c.transpose()).scale_by(&0.5)).collect();
    let skew: Vec<Mat<f64>> = comm.iter().map(|c| c.sub(&c.transpose()).scale_by(&0.5)).collect();
    let sym = span_basis(&sym, n);
    let skew = span_basis(&skew, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut split = None;
    for _ in 0..5 {
        let mut c = Mat::zeros(n, n);
        for s in &sym {
            c = c.add(&s.scale_by(&rng.gen_range(-1.0..1.0)));
        }
        let eig = SymmetricEigen::new(c.to_na());
        if let Some(groups) = clusters(eig.eigenvalues.as_slice()) {
            let subs: Vec<Vec<Vec<f64>>> = groups
                .iter()
                .map(|g| g.iter().map(|&k| eig.eigenvectors.column(k).iter().copied().collect()).collect())
                .collect();
            split = Some(subs);
            break;
        }
    }
    let subspaces = split.ok_or(Error::CommutantDegenerate { attempts: 5 })?;
    let subspaces = if subspaces.len() < 2 { Vec::new() } else { subspaces };

    let mut invariance_defect: f64 = 0.0;
    for s in &subspaces {
        let u = Mat::from_columns(s);
        let p = u.mul(&u.transpose());
        let q = Mat::identity(n).sub(&p);
        for a in &est.basis {
            invariance_defect = invariance_defect.max(q.mul(a).mul(&p).op_norm());
        }
    }

    let mut complex_structure = None;
    if n % 2 == 0 && !skew.is_empty() {
        for _ in 0..5 {
            let mut k = Mat::zeros(n, n);
            for s in &skew {
                k = k.add(&s.scale_by(&rng.gen_range(-1.0..1.0)));
            }
            let k2 = k.mul(&k);
            let lam = -k2.trace() / n as f64;
            if lam <= 0.0 {
                continue;
            }
            if k2.add(&Mat::identity(n).scale_by(&lam)).max_abs() < 1e-6 * lam {
                complex_structure = Some(k.scale_by(&(1.0 / lam.sqrt())));
                break;
            }
        }
    }
    Ok(InvariantSplit { subspaces, complex_structure, invariance_defect })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HolonomyLabel {
    Trivial,
    Reducible,
    Unitary,
    Generic,
    Undetermined,
}

impl std::fmt::Display for HolonomyLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            HolonomyLabel::Trivial => "trivial",
            HolonomyLabel::Reducible => "reducible",
            HolonomyLabel::Unitary => "unitary",
            HolonomyLabel::Generic => "generic",
            HolonomyLabel::Undetermined => "undetermined",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
pub struct HolonomyClassification {
    pub label: HolonomyLabel,
    pub algebra_dim: usize,
    pub invariant_distributions: Vec<Distribution>,
    /// Complex structure at the base point in coordinate components.
    pub complex_structure: Option<Mat<f64>>,
    pub estimate: HolonomyEstimate,
    pub split: InvariantSplit,
}

/// Options for [`classify`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifyOptions {
    pub backend: Backend,
    pub extra_loops: usize,
    pub seed: u64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions { backend: Backend::Dual, extra_loops: 4, seed: 7 }
    }
}

pub fn classify(g: &MetricField, x0: &[f64], opts: &ClassifyOptions) -> Result<HolonomyClassification> {
    let n = g.dim();
    let fam = LoopFamily::standard(g.dom(), x0, opts.extra_loops, opts.seed)?;
    let est = sample_holonomy(g, &fam, opts.backend)?;
    let split = invariant_subspaces(&est, opts.seed ^ 0x9e37_79b9)?;
    let e = &est.frame;
    let to_coords = |v: &Vec<f64>| e.mul_vec(v);
    let invariant_distributions = split
        .subspaces
        .iter()
        .map(|s| Distribution::Transported { metric: g.clone(), x0: x0.to_vec(), basis0: s.iter().map(to_coords).collect() })
        .collect::<Vec<_>>();
    let complex_structure = match &split.complex_structure {
        Some(j) => Some(e.mul(j).mul(&e.inverse()?)),
        None => None,
    };
    let full = n * (n - 1) / 2;
    let label = if est.algebra_dim == 0 {
        HolonomyLabel::Trivial
    } else if !split.subspaces.is_empty() {
        HolonomyLabel::Reducible
    } else if est.algebra_dim == full {
        HolonomyLabel::Generic
    } else if complex_structure.is_some() && n % 2 == 0 && est.algebra_dim <= (n / 2) * (n / 2) {
        HolonomyLabel::Unitary
    } else {
        HolonomyLabel::Undetermined
    };
    Ok(HolonomyClassification {
        label,
        algebra_dim: est.algebra_dim,
        invariant_distributions: if label == HolonomyLabel::Trivial {
            (0..n)
                .map(|a| Distribution::Transported { metric: g.clone(), x0: x0.to_vec(), basis0: vec![e.column(a)] })
                .collect()
        } else {
            invariant_distributions
        },
        complex_structure,
        estimate: est,
        split,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;

    #[test]
    fn flat_torus_is_trivial() {
        let g = MetricField::flat(ChartDomain::torus(3, 1.0, 4).unwrap());
        let c = classify(&g, &[0.5, 0.5, 0.5], &ClassifyOptions::default()).unwrap();
        assert_eq!(c.algebra_dim, 0);
        assert_eq!(c.label, HolonomyLabel::Trivial);
        assert_eq!(c.invariant_distributions.len(), 3);
    }

    #[test]
    fn sphere_is_generic() {
        let dom = ChartDomain::new(vec![0.3, -1.0], vec![2.8, 1.0], vec![false, false], vec![4, 4]).unwrap();
        let g = MetricField::round_sphere(dom).unwrap();
        let c = classify(&g, &[1.2, 0.0], &ClassifyOptions::default()).unwrap();
        assert_eq!(c.algebra_dim, 1);
        assert_eq!(c.label, HolonomyLabel::Generic);
        assert!(c.invariant_distributions.is_empty());
    }

    #[test]
    fn product_with_line_is_reducible() {
        let dom = ChartDomain::cube(3, 1.0, 4).unwrap();
        let g = MetricField::diagonal(dom, vec![Expr::one(), Expr::one(), Expr::exp(Expr::scale(-2.0, Expr::sin(Expr::var(1))))])
            .unwrap();
        let c = classify(&g, &[0.0, 0.1, 0.0], &ClassifyOptions::default()).unwrap();
        assert_eq!(c.algebra_dim, 1);
        assert_eq!(c.label, HolonomyLabel::Reducible);
        let mut ranks: Vec<usize> = c.invariant_distributions.iter().map(|d| d.rank()).collect();
        ranks.sort();
        assert_eq!(ranks, vec![1, 2]);
    }
}
