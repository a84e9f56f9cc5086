//! Seeded random fields for sweeps and property tests.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::chart::{ChartDomain, ScalarField};
use crate::conformal::{rescale, ConformalPair};
use crate::curvature::MetricField;
use crate::error::Result;
use crate::expr::Expr;
use crate::exterior::form::multi_indices;
use crate::exterior::FormField;
use crate::warped::{Factor, TripleWarpedSpec};

/// A random smooth function of the listed variables: a low-degree polynomial plus one trig term.
pub fn random_function<R: Rng>(rng: &mut R, vars: &[usize], amplitude: f64) -> Expr {
    if vars.is_empty() {
        return Expr::c(amplitude * rng.gen_range(-1.0..1.0));
    }
    let mut terms = vec![Expr::c(amplitude * rng.gen_range(-0.5..0.5))];
    for &v in vars {
        terms.push(Expr::scale(amplitude * rng.gen_range(-1.0..1.0), Expr::var(v)));
    }
    let a = *vars.choose(rng).expect("non-empty");
    let b = *vars.choose(rng).expect("non-empty");
    terms.push(Expr::scale(amplitude * rng.gen_range(-0.5..0.5), Expr::mul(Expr::var(a), Expr::var(b))));
    let arg = Expr::sum(vars.iter().map(|&v| Expr::scale(rng.gen_range(-1.5..1.5), Expr::var(v))));
    let trig = if rng.gen_bool(0.5) { Expr::sin(arg) } else { Expr::cos(arg) };
    terms.push(Expr::scale(amplitude * rng.gen_range(-0.5..0.5), trig));
    Expr::sum(terms)
}

/// A random metric in `n` variables, uniformly positive definite on `[-1, 1]^n`:
/// diagonal entries `1.5 + f` with `|f| ≤ 0.6`, off-diagonal entries bounded by `0.6/n`.
pub fn random_metric_comps<R: Rng>(rng: &mut R, n: usize) -> Vec<Vec<Expr>> {
    let vars: Vec<usize> = (0..n).collect();
    let mut comps = vec![vec![Expr::zero(); n]; n];
    for i in 0..n {
        for j in i..n {
            let bump = |rng: &mut R, amp: f64| {
                let arg = Expr::sum(vars.iter().map(|&v| Expr::scale(rng.gen_range(-1.0..1.0), Expr::var(v))));
                Expr::add(Expr::c(amp * rng.gen_range(-0.5..0.5)), Expr::scale(amp * rng.gen_range(-0.5..0.5), Expr::sin(arg)))
            };
            comps[i][j] = if i == j { Expr::add(Expr::c(1.5), bump(rng, 0.6)) } else { bump(rng, 0.6 / n as f64) };
            comps[j][i] = comps[i][j].clone();
        }
    }
    comps
}

pub fn random_metric<R: Rng>(rng: &mut R, dom: ChartDomain) -> Result<MetricField> {
    let n = dom.dim();
    MetricField::new(dom, random_metric_comps(rng, n))
}

/// Random `(g, φ)` on `[-1, 1]^n` with `|φ|` of order `0.3`.
pub fn random_conformal_pair<R: Rng>(rng: &mut R, n: usize) -> Result<ConformalPair> {
    let dom = ChartDomain::cube(n, 1.0, 4)?;
    let g = random_metric(rng, dom)?;
    let phi = random_function(rng, &(0..n).collect::<Vec<_>>(), 0.3);
    rescale(&g, &ScalarField::new(phi))
}

/// Random `p`-form on an `n`-dimensional chart.
pub fn random_form<R: Rng>(rng: &mut R, n: usize, p: usize) -> Result<FormField> {
    let vars: Vec<usize> = (0..n).collect();
    let coeffs = multi_indices(n, p).iter().map(|_| random_function(rng, &vars, 1.0)).collect();
    FormField::new(n, p, coeffs)
}

fn symbolic_det(m: &[Vec<Expr>]) -> Expr {
    match m.len() {
        0 => Expr::one(),
        1 => m[0][0].clone(),
        k => Expr::sum((0..k).map(|c| {
            let minor: Vec<Vec<Expr>> =
                m[1..].iter().map(|r| r.iter().enumerate().filter(|(j, _)| *j != c).map(|(_, e)| e.clone()).collect()).collect();
            let term = Expr::mul(m[0][c].clone(), symbolic_det(&minor));
            if c % 2 == 0 {
                term
            } else {
                Expr::neg(term)
            }
        })),
    }
}

/// A product metric `g_a ⊕ g_b` on `[-1, 1]^n` (factor `a` of dimension `k`) together with
/// the volume form of the first factor, which is parallel.
pub fn product_with_parallel_form<R: Rng>(rng: &mut R, n: usize, k: usize) -> Result<(MetricField, FormField)> {
    assert!(k >= 1 && k < n, "factor dimension must lie strictly between 0 and n");
    let a = random_metric_comps(rng, k);
    let b: Vec<Vec<Expr>> = random_metric_comps(rng, n - k)
        .into_iter()
        .map(|r| r.into_iter().map(|e| e.shift_vars(k)).collect())
        .collect();
    let mut comps = vec![vec![Expr::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            if i < k && j < k {
                comps[i][j] = a[i][j].clone();
            } else if i >= k && j >= k {
                comps[i][j] = b[i - k][j - k].clone();
            }
        }
    }
    let g = MetricField::new(ChartDomain::cube(n, 1.0, 4)?, comps)?;
    let vol = Expr::sqrt(symbolic_det(&a));
    let idx: Vec<usize> = (0..k).collect();
    Ok((g, FormField::monomial(n, &idx, vol)))
}

/// Random triple warped construction data with factor dimensions in `1..=2` and total at most `max_dim`.
pub fn random_triple_warped<R: Rng>(rng: &mut R, max_dim: usize) -> TripleWarpedSpec {
    let dims = loop {
        let d = [rng.gen_range(1..=2), rng.gen_range(1..=2), rng.gen_range(1..=2)];
        if d.iter().sum::<usize>() <= max_dim.max(3) {
            break d;
        }
    };
    let factors = dims.map(|n| Factor { metric: random_metric_comps(rng, n), ..Factor::flat_box(n, 1.0) });
    let vars: Vec<usize> = (0..dims[1]).collect();
    let phi = loop {
        let f = random_function(rng, &vars, 0.4);
        if vars.iter().any(|&v| f.depends_on(v)) {
            break f;
        }
    };
    TripleWarpedSpec { factors, phi, grid_res: 4 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_metrics_are_positive_definite_on_the_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 2..=5 {
            for _ in 0..5 {
                random_metric(&mut rng, ChartDomain::cube(n, 1.0, 4).unwrap()).unwrap().validate().unwrap();
            }
        }
    }

    #[test]
    fn same_seed_same_fields() {
        let a = random_conformal_pair(&mut ChaCha8Rng::seed_from_u64(3), 3).unwrap();
        let b = random_conformal_pair(&mut ChaCha8Rng::seed_from_u64(3), 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn symbolic_determinant_matches_numeric() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_metric_comps(&mut rng, 3);
        let x = [0.1, -0.2, 0.3];
        let num = crate::linalg::Mat::from_fn(3, 3, |i, j| m[i][j].eval(&x)).det();
        assert!((symbolic_det(&m).eval(&x) - num).abs() < 1e-12);
    }
}
