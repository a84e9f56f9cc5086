use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use confgeom::chart::{Backend, ChartDomain, Ctx};
use confgeom::conformal::{connection_law_residual, scalar_law_residual, trace_free_ricci_residual};
use confgeom::curvature::MetricField;
use confgeom::expr::{parse, Expr};
use confgeom::exterior::form::multi_indices;
use confgeom::exterior::Form;
use confgeom::holonomy::{classify, ClassifyOptions, Distribution, HolonomyLabel};
use confgeom::linalg::Mat;
use confgeom::samples::{random_conformal_pair, random_metric};

fn spd(rng: &mut ChaCha8Rng, n: usize) -> Mat<f64> {
    let a = Mat::from_vec(n, n, (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect());
    a.mul(&a.transpose()).add(&Mat::identity(n))
}

fn form(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Form<f64> {
    Form::from_coeffs(n, p, multi_indices(n, p).iter().map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hodge_star_squares_to_sign(seed in any::<u64>(), n in 1usize..=5, p_frac in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = ((n + 1) as f64 * p_frac) as usize;
        let g = spd(&mut rng, n);
        let psi = form(&mut rng, n, p);
        let twice = psi.hodge(&g, 1.0).unwrap().hodge(&g, 1.0).unwrap();
        let sign = if (p * (n - p)) % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!(twice.sub(&psi.scale(sign)).max_abs() < 1e-9);
    }

    #[test]
    fn hodge_star_preserves_norm(seed in any::<u64>(), n in 1usize..=5, p_frac in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = ((n + 1) as f64 * p_frac) as usize;
        let g = spd(&mut rng, n);
        let ginv = g.inverse().unwrap();
        let psi = form(&mut rng, n, p);
        let a = psi.norm(&ginv);
        let b = psi.hodge(&g, 1.0).unwrap().norm(&ginv);
        prop_assert!((a - b).abs() < 1e-9 * a.max(1.0));
    }

    #[test]
    fn coordinate_projectors_are_orthogonal_idempotents(seed in any::<u64>(), n in 2usize..=4, mask in 1u32..15) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let axes: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        prop_assume!(!axes.is_empty());
        let g = random_metric(&mut rng, ChartDomain::cube(n, 1.0, 4).unwrap()).unwrap();
        let d = Distribution::coordinate_block(&g, &axes);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.8..0.8)).collect();
        let p = d.projector_at(&x).unwrap();
        prop_assert!(p.mul(&p).sub(&p).max_abs() < 1e-12);
        let gm = g.matrix(&x);
        let gp = gm.mul(&p);
        prop_assert!(gp.sub(&gp.transpose()).max_abs() < 1e-12);
        let q = d.complement().projector_at(&x).unwrap();
        prop_assert!(p.add(&q).sub(&Mat::identity(n)).max_abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conformal_laws_hold_for_random_pairs(seed in any::<u64>(), n in 2usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pair = random_conformal_pair(&mut rng, n).unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.7..0.7)).collect();
        let ctx = Ctx::dual(pair.dom());
        prop_assert!(connection_law_residual(&pair, &x, &ctx).unwrap() < 1e-9);
        prop_assert!(trace_free_ricci_residual(&pair, &x, &ctx).unwrap() < 1e-9);
        prop_assert!(scalar_law_residual(&pair, &x, &ctx, None).unwrap().r1 < 1e-9);
    }
}

#[test]
fn homothety_does_not_change_the_label() {
    let names: Vec<String> = ["x", "t", "y"].iter().map(|s| s.to_string()).collect();
    let dom = ChartDomain::cube(3, 1.0, 4).unwrap();
    let product =
        MetricField::diagonal(dom.clone(), vec![Expr::one(), Expr::one(), parse("exp(-2*sin(t))", &names).unwrap()])
            .unwrap();
    let sphere = MetricField::round_sphere(
        ChartDomain::new(vec![0.2, -3.0], vec![2.9, 3.0], vec![false, false], vec![4, 4]).unwrap(),
    )
    .unwrap();
    let flat = MetricField::flat(dom);
    let opts = ClassifyOptions { backend: Backend::Dual, ..ClassifyOptions::default() };
    for (g, x0, want) in [
        (&product, vec![0.0, 0.2, 0.0], HolonomyLabel::Reducible),
        (&sphere, vec![1.1, 0.0], HolonomyLabel::Generic),
        (&flat, vec![0.0, 0.0, 0.0], HolonomyLabel::Trivial),
    ] {
        let a = classify(g, &x0, &opts).unwrap();
        let b = classify(&g.scaled(&Expr::c(4.0)), &x0, &opts).unwrap();
        assert_eq!(a.label, want);
        assert_eq!(b.label, want);
        assert_eq!(a.algebra_dim, b.algebra_dim);
    }
}
