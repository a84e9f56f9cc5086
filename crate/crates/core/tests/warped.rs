use confgeom::chart::{Backend, ChartDomain, ScalarField};
use confgeom::curvature::MetricField;
use confgeom::error::Error;
use confgeom::expr::Expr;
use confgeom::holonomy::{
    distribution_parallel_residual, transport_matrix, Connection, LoopFamily, Path, TransportOptions,
};
use confgeom::warped::{alignment_diagnostics, build, pair_alignment, recover_factors, AlignmentInput, TripleWarpedSpec};

fn pair_112() -> confgeom::warped::TripleWarpedPair {
    build(&TripleWarpedSpec::flat([1, 1, 2], 1.0, Expr::sin(Expr::var(0)))).unwrap()
}

#[test]
fn constructed_pair_is_aligned() {
    let pair = pair_112();
    for x in [[0.0, 0.3, 0.1, -0.2], [0.5, -0.7, 0.4, 0.4]] {
        let a = pair_alignment(&pair, &x, Backend::Dual).unwrap();
        assert!(a.dphi_wedge_t12 < 1e-12);
        assert!(a.m2_defect < 1e-12);
        assert!(a.c2_defect < 1e-12);
        assert!(a.dphi_on_t3 < 1e-12);
    }
}

#[test]
fn warping_along_the_third_factor_is_flagged() {
    let pair = pair_112();
    let t12 = pair.t12();
    let phi = ScalarField::new(Expr::add(Expr::sin(Expr::var(1)), Expr::scale(0.5, Expr::var(3))));
    let input = AlignmentInput { g: &pair.g, t1: &pair.t1, t12: &t12, t3: &pair.t3, phi: &phi };
    let a = alignment_diagnostics(&input, &[0.1, 0.2, 0.0, 0.3], Backend::Dual).unwrap();
    assert!(a.m2_defect > 0.01, "{a:?}");
    assert!(a.dphi_on_t3 > 0.1);
}

#[test]
fn warping_function_outside_the_middle_factor_is_rejected() {
    let spec = TripleWarpedSpec::flat([1, 1, 2], 1.0, Expr::var(2));
    assert!(matches!(build(&spec), Err(Error::DimensionMismatch(_))));
    let spec = TripleWarpedSpec::flat([1, 1, 2], 1.0, Expr::c(0.3));
    assert!(matches!(build(&spec), Err(Error::ConstantWarping)));
}

#[test]
fn mixed_perturbation_breaks_parallelism_in_proportion() {
    let pair = pair_112();
    let x = [0.2, 0.1, -0.3, 0.25];
    let base = distribution_parallel_residual(&pair.g, &pair.t1, &x, Backend::Dual).unwrap();
    assert!(base < 1e-12);
    let residual = |eps: f64| {
        let h = Expr::scale(eps, Expr::var(0));
        let g = pair.g.perturbed(2, 3, h);
        let t1 = pair.t1.with_metric(&g);
        distribution_parallel_residual(&g, &t1, &x, Backend::Dual).unwrap()
    };
    let small = residual(1e-4);
    let large = residual(1e-2);
    assert!(small > 1e-6, "{small}");
    let ratio = large / small;
    assert!((ratio - 100.0).abs() < 5.0, "{ratio}");
}

#[test]
fn recovery_survives_a_coarse_and_fine_grid() {
    let pair = pair_112();
    for res in [2, 5] {
        let pts = pair.dom().clone().with_grid_res(res).grid_points();
        let rec = recover_factors(&pair.g, &pair.tilde, &pair.t1, &pair.t3, &pair.phi, &pts).unwrap();
        assert!(rec.reconstruction < 1e-10);
        assert!(rec.vanishing_defect < 1e-10);
        assert!(rec.t2_min_eigenvalue > 0.1);
    }
}

#[test]
fn shrinking_a_sphere_loop_scales_the_rotation_with_area() {
    let dom = ChartDomain::new(vec![0.2, -3.0], vec![2.9, 3.0], vec![false, false], vec![4, 4]).unwrap();
    let s2 = MetricField::round_sphere(dom.clone()).unwrap();
    let conn = Connection::new(&s2, Backend::Dual);
    let (th0, a, b) = (1.0, 0.2, 0.2);
    let angle = |path: &Path| {
        let p = transport_matrix(&conn, path, &TransportOptions::default()).unwrap();
        let e = confgeom::chart::coordinate_frame(&s2.matrix(&[th0, 0.0])).unwrap();
        let q = e.inverse().unwrap().mul(&p).mul(&e);
        q[(1, 0)].atan2(q[(0, 0)]).abs()
    };
    let area = |s: f64| b * s * (th0.cos() - (th0 + a * s).cos());
    let full = Path::rectangle(&[th0, 0.0], 0, 1, a, b);
    let half = full.shrunk(0.5);
    let ratio = angle(&half) / angle(&full);
    assert!((ratio - area(0.5) / area(1.0)).abs() < 1e-9, "{ratio}");
    assert!((ratio - 0.25).abs() < 0.05);

    let fam = LoopFamily::standard(&dom, &[th0, 0.0], 4, 3).unwrap();
    let small = fam.shrunk(0.5);
    small.validate(&dom).unwrap();
    assert_eq!(small.loops.len(), fam.loops.len());
}
