//! Check runners. Each returns the residual that the registry compares with its tolerance.

use nalgebra::DMatrix;
use rand::Rng;

use crate::chart::{coordinate_frame, integrate_chart, jets, Backend, ChartDomain, Ctx, ScalarField};
use crate::conformal::{
    conformal_vector_residual, connection_law_residual, einstein_pair_diagnostics, gradient_field, rescale,
    scalar_law_residual, trace_free_ricci_residual, ConformalPair,
};
use crate::curvature::{curvature_pack, grad_laplace, volume_density};
use crate::error::{Error, Result};
use crate::exterior::form::multi_indices;
use crate::exterior::{
    codifferential, codifferential_hodge, conformal_form_transport, flat, twistor_killing_residual, Form, Weighted,
};
use crate::holonomy::{classify, sample_holonomy, transport_matrix, ClassifyOptions, Connection, HolonomyLabel, LoopFamily, Path, TransportOptions};
use crate::linalg::Mat;
use crate::samples::{product_with_parallel_form, random_conformal_pair, random_form, random_triple_warped};
use crate::warped::{
    build, conjugate_identity_check, detect_split, input_defect, pair_alignment, recover_factors, TripleWarpedPair,
};

use super::config::{MetricSpec, Setup};
use super::HarnessError;

fn need<T>(v: Option<T>, what: &str, id: &str) -> std::result::Result<T, HarnessError> {
    v.ok_or_else(|| HarnessError::Config(format!("check {id} needs {what}")))
}

/// Verify a scenario provides what a check consumes.
pub fn validate(setup: &Setup, id: &str) -> std::result::Result<(), HarnessError> {
    let swept = setup.cfg.sweep.is_some();
    match id {
        "conformal.connection-law" | "conformal.trace-free-ricci-law" | "conformal.scalar-law" if !swept => {
            need(setup.phi.as_ref(), "a conformal factor or a sweep", id).map(drop)
        }
        "exterior.transport-d" | "exterior.transport-nabla" | "exterior.transport-delta" | "exterior.twistor-preserved"
            if !swept =>
        {
            need(setup.phi.as_ref(), "a conformal factor or a sweep", id)?;
            need(setup.forms.first(), "a form or a sweep", id).map(drop)
        }
        "conformal.parallel-field-scalar" => {
            need(setup.phi.as_ref(), "a conformal factor", id)?;
            need(setup.parallel_field.as_ref(), "a parallel field", id).map(drop)
        }
        "conformal.non-parallel-detected" => {
            need(setup.phi.as_ref(), "a conformal factor", id)?;
            need(setup.perturbed_field.as_ref(), "a perturbed field", id).map(drop)
        }
        "conformal.einstein-trace-free-ricci"
        | "conformal.einstein-divergence-form"
        | "conformal.gradient-field-conformal"
        | "conformal.gradient-field-non-killing"
        | "chart.torus-divergence" => need(setup.phi.as_ref(), "a conformal factor", id).map(drop),
        "exterior.parallel-form-twistor" => need(setup.cfg.sweep.as_ref(), "a sweep", id).map(drop),
        "holonomy.sphere-area" => match setup.cfg.metric {
            MetricSpec::RoundSphere => Ok(()),
            _ => Err(HarnessError::Config(format!("check {id} needs the round-sphere family"))),
        },
        "holonomy.block-leakage" => need(setup.cfg.blocks.as_ref(), "block sizes", id).map(drop),
        "holonomy.label" => need(setup.cfg.expect_label.as_ref(), "an expected label", id).map(drop),
        "warped.conjugate-identity"
        | "warped.parallel-t1"
        | "warped.parallel-t3"
        | "warped.reducible"
        | "warped.reconstruction"
        | "warped.round-trip"
        | "warped.route-agreement"
        | "warped.middle-positive"
        | "warped.alignment"
        | "warped.detected-split"
            if !swept =>
        {
            need(setup.warped.as_ref(), "the triple-warped family or a sweep", id).map(drop)
        }
        _ => Ok(()),
    }
}

/// Random conformal pairs of the sweep, or the scenario pair.
fn conformal_cases(setup: &Setup, salt: u64) -> Result<Vec<(ConformalPair, Vec<Vec<f64>>)>> {
    match &setup.cfg.sweep {
        Some(sw) => {
            let mut rng = setup.rng(salt);
            let mut out = Vec::new();
            for &n in &sw.dims {
                for _ in 0..sw.count {
                    let pair = random_conformal_pair(&mut rng, n)?;
                    let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.6..0.6)).collect();
                    out.push((pair, vec![x]));
                }
            }
            Ok(out)
        }
        None => {
            let pair = setup.pair().ok_or_else(|| Error::DomainMismatch("conformal factor does not fit the chart".into()))?;
            Ok(vec![(pair, setup.points.clone())])
        }
    }
}

fn max_over<T>(cases: &[T], f: impl Fn(&T) -> Result<f64>) -> Result<f64> {
    cases.iter().try_fold(0.0f64, |acc, c| Ok(acc.max(f(c)?)))
}

fn conformal_law(setup: &Setup, law: fn(&ConformalPair, &[f64], &Ctx) -> Result<f64>) -> Result<f64> {
    let cases = conformal_cases(setup, 1)?;
    max_over(&cases, |(pair, pts)| {
        let ctx = Ctx::new(pair.dom(), setup.backend);
        max_over(pts, |x| law(pair, x, &ctx))
    })
}

enum TransportPart {
    D,
    Nabla,
    Delta,
    Twistor,
}

fn form_transport(setup: &Setup, part: TransportPart) -> Result<f64> {
    let pick = |r: crate::exterior::TransportResidual| match part {
        TransportPart::D => r.d,
        TransportPart::Nabla => r.nabla,
        TransportPart::Delta => r.delta,
        TransportPart::Twistor => r.twistor_preserved,
    };
    match &setup.cfg.sweep {
        Some(sw) => {
            let mut rng = setup.rng(2);
            let mut worst: f64 = 0.0;
            for &n in &sw.dims {
                for _ in 0..sw.count {
                    let pair = random_conformal_pair(&mut rng, n)?;
                    let p = rng.gen_range(1..n);
                    let psi = random_form(&mut rng, n, p)?;
                    let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.6..0.6)).collect();
                    let ctx = Ctx::new(pair.dom(), setup.backend);
                    worst = worst.max(pick(conformal_form_transport(&pair, &psi, &x, &ctx)?));
                }
            }
            Ok(worst)
        }
        None => {
            let pair = setup.pair().ok_or_else(|| Error::DomainMismatch("conformal factor does not fit the chart".into()))?;
            let ctx = Ctx::new(pair.dom(), setup.backend);
            let mut worst: f64 = 0.0;
            for psi in &setup.forms {
                for x in &setup.points {
                    worst = worst.max(pick(conformal_form_transport(&pair, psi, x, &ctx)?));
                }
            }
            Ok(worst)
        }
    }
}

fn parallel_form_twistor(setup: &Setup) -> Result<f64> {
    let sw = setup.cfg.sweep.as_ref().expect("validated");
    let mut rng = setup.rng(3);
    let mut worst: f64 = 0.0;
    for &n in &sw.dims {
        for _ in 0..sw.count {
            let k = rng.gen_range(1..n);
            let (g, psi) = product_with_parallel_form(&mut rng, n, k)?;
            let phi = crate::samples::random_function(&mut rng, &(0..n).collect::<Vec<_>>(), 0.3);
            let pair = rescale(&g, &ScalarField::new(phi))?;
            let tilde_psi = Weighted { phi: &pair.phi.expr, weight: k as f64 + 1.0, inner: &psi };
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.6..0.6)).collect();
            let ctx = Ctx::new(pair.dom(), setup.backend);
            worst = worst.max(twistor_killing_residual(&pair.tilde, &tilde_psi, &x, &ctx)?.twistor);
        }
    }
    Ok(worst)
}

fn random_spd<R: Rng>(rng: &mut R, n: usize) -> Mat<f64> {
    let a = Mat::from_vec(n, n, (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect());
    a.mul(&a.transpose()).add(&Mat::identity(n))
}

fn random_pointwise_form<R: Rng>(rng: &mut R, n: usize, p: usize) -> Form<f64> {
    let c = multi_indices(n, p).iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
    Form::from_coeffs(n, p, c).expect("coefficient count matches")
}

/// Relative size of a pointwise form discrepancy.
fn rel(a: &Form<f64>, b: &Form<f64>) -> f64 {
    a.sub(b).max_abs() / (1.0 + b.max_abs())
}

fn hodge_identity(setup: &Setup, wedge: bool) -> Result<f64> {
    let mut rng = setup.rng(if wedge { 5 } else { 4 });
    let mut worst: f64 = 0.0;
    for n in 1..=5 {
        for p in 0..=n {
            if wedge && p == n {
                continue;
            }
            for _ in 0..3 {
                let g = random_spd(&mut rng, n);
                let or = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let psi = random_pointwise_form(&mut rng, n, p);
                if wedge {
                    let xv: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let lhs = flat(&g, &xv).wedge(&psi)?.hodge(&g, or)?;
                    let rhs = psi.hodge(&g, or)?.interior(&xv)?.scale(if p % 2 == 0 { 1.0 } else { -1.0 });
                    worst = worst.max(rel(&lhs, &rhs));
                } else {
                    let twice = psi.hodge(&g, or)?.hodge(&g, or)?;
                    let sign = if (p * (n - p)) % 2 == 0 { 1.0 } else { -1.0 };
                    worst = worst.max(rel(&twice, &psi.scale(sign)));
                }
            }
        }
    }
    Ok(worst)
}

fn codifferential_routes(setup: &Setup) -> Result<f64> {
    let mut rng = setup.rng(6);
    let mut worst: f64 = 0.0;
    for n in 2..=5 {
        for p in 1..=n {
            let g = crate::samples::random_metric(&mut rng, ChartDomain::cube(n, 1.0, 4)?)?;
            let psi = random_form(&mut rng, n, p)?;
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let ctx = Ctx::new(g.dom(), setup.backend);
            let a = codifferential(&g, &psi, &x, &ctx)?;
            let b = codifferential_hodge(&g, &psi, &x, &ctx)?;
            worst = worst.max(a.sub(&b).norm(&g.matrix(&x).inverse()?));
        }
    }
    Ok(worst)
}

fn backend_agreement(setup: &Setup) -> Result<f64> {
    let g = &setup.metric;
    let dual = Ctx::new(g.dom(), Backend::Dual);
    let fd = Ctx::new(g.dom(), Backend::Fd);
    let mut worst: f64 = 0.0;
    for x in &setup.points {
        let x = g.dom().wrap(x)?;
        let a = jets(g, &x, 2, &dual)?;
        let b = jets(g, &x, 2, &fd)?;
        for (ja, jb) in a.iter().zip(&b) {
            for (u, v) in ja.d1.iter().chain(&ja.d2).zip(jb.d1.iter().chain(&jb.d2)) {
                worst = worst.max((u - v).abs());
            }
        }
    }
    Ok(worst)
}

fn torus_divergence(setup: &Setup) -> Result<f64> {
    let g = &setup.metric;
    let phi = setup.phi.as_ref().expect("validated");
    let ctx = Ctx::new(g.dom(), setup.backend);
    let lap = |x: &[f64]| Ok(grad_laplace(g, phi, x, &ctx)?.laplacian);
    let dens = |x: &[f64]| volume_density(g, x);
    let q = integrate_chart(g.dom(), &lap, &dens)?;
    if !q.certified {
        return Err(Error::InvalidChart("integration needs a fully periodic chart".into()));
    }
    Ok(q.value.abs())
}

fn riemann_symmetries(setup: &Setup) -> Result<f64> {
    let ctx = Ctx::new(setup.metric.dom(), setup.backend);
    max_over(&setup.points, |x| Ok(curvature_pack(&setup.metric, x, &ctx)?.symmetry_defect()))
}

fn einstein(setup: &Setup, which: u8) -> Result<f64> {
    let pair = setup.pair().ok_or_else(|| Error::DomainMismatch("conformal factor does not fit the chart".into()))?;
    let ctx = Ctx::new(pair.dom(), setup.backend);
    max_over(&setup.points, |x| {
        let d = einstein_pair_diagnostics(&pair, x, &ctx)?;
        Ok(if which == 0 { d.ric0_tilde } else { d.ng_residual })
    })
}

fn gradient_conformal(setup: &Setup, killing: bool) -> Result<f64> {
    let pair = setup.pair().ok_or_else(|| Error::DomainMismatch("conformal factor does not fit the chart".into()))?;
    let ctx = Ctx::new(pair.dom(), setup.backend);
    let xi = gradient_field(&pair, &ctx);
    let vals = setup
        .points
        .iter()
        .map(|x| conformal_vector_residual(&pair.g, &xi, x, &ctx))
        .collect::<Result<Vec<_>>>()?;
    Ok(if killing {
        vals.iter().map(|v| v.1).fold(f64::INFINITY, f64::min)
    } else {
        vals.iter().map(|v| v.0).fold(0.0, f64::max)
    })
}

fn parallel_field_scalar(setup: &Setup) -> Result<f64> {
    let pair = setup.pair().ok_or_else(|| Error::DomainMismatch("conformal factor does not fit the chart".into()))?;
    let ctx = Ctx::new(pair.dom(), setup.backend);
    let xi = setup.parallel_field.as_ref().expect("validated");
    max_over(&setup.points, |x| {
        let law = scalar_law_residual(&pair, x, &ctx, Some(xi))?;
        match (law.r2, law.obstruction) {
            (Some(a), Some(b)) => Ok(a.max(b)),
            _ => Err(Error::NotParallel { defect: law.certificate.map_or(f64::NAN, |c| c.transport_defect) }),
        }
    })
}

fn non_parallel_detected(setup: &Setup) -> Result<f64> {
    let pair = setup.pair().ok_or_else(|| Error::DomainMismatch("conformal factor does not fit the chart".into()))?;
    let ctx = Ctx::new(pair.dom(), setup.backend);
    let xi = setup.perturbed_field.as_ref().expect("validated");
    let mut smallest = f64::INFINITY;
    for x in &setup.points {
        let d = match scalar_law_residual(&pair, x, &ctx, Some(xi)) {
            Err(Error::NotParallel { defect }) => defect,
            Ok(law) => law.certificate.map_or(0.0, |c| c.transport_defect),
            Err(e) => return Err(e),
        };
        smallest = smallest.min(d);
    }
    Ok(smallest)
}

fn classify_opts(setup: &Setup) -> ClassifyOptions {
    ClassifyOptions { backend: setup.backend, extra_loops: setup.cfg.loops.extra, seed: setup.cfg.seed }
}

fn family(setup: &Setup) -> Result<LoopFamily> {
    LoopFamily::standard(setup.metric.dom(), &setup.base, setup.cfg.loops.extra, setup.cfg.seed)
}

fn sphere_area(setup: &Setup) -> Result<f64> {
    let g = &setup.metric;
    let conn = Connection::new(g, setup.backend);
    let x0 = &setup.base;
    let e = coordinate_frame(&g.matrix_at(x0)?)?;
    let einv = e.inverse()?;
    let mut worst: f64 = 0.0;
    for s in [0.1, 0.2, 0.4] {
        let si = if x0[0] + s <= g.dom().hi()[0] { s } else { -s };
        let sj = if x0[1] + s <= g.dom().hi()[1] { s } else { -s };
        let path = Path::rectangle(x0, 0, 1, si, sj);
        let q = einv.mul(&transport_matrix(&conn, &path, &TransportOptions::default())?).mul(&e);
        let angle = q[(1, 0)].atan2(q[(0, 0)]).abs();
        let area = (sj * (x0[0].cos() - (x0[0] + si).cos())).abs();
        worst = worst.max((angle - area).abs());
    }
    Ok(worst)
}

fn block_leakage(setup: &Setup) -> Result<f64> {
    let blocks = setup.cfg.blocks.as_ref().expect("validated");
    let mut owner = Vec::new();
    for (b, &size) in blocks.iter().enumerate() {
        owner.extend(std::iter::repeat(b).take(size));
    }
    let est = sample_holonomy(&setup.metric, &family(setup)?, setup.backend)?;
    let einv = est.frame.inverse()?;
    let n = setup.dim();
    let mut worst: f64 = 0.0;
    for q in &est.transports {
        let p = est.frame.mul(q).mul(&einv);
        for i in 0..n {
            for j in 0..n {
                if owner[i] != owner[j] {
                    worst = worst.max(p[(i, j)].abs());
                }
            }
        }
    }
    Ok(worst)
}

/// `max(0, dim span{R(e_i, e_j)} − algebra dimension)`.
fn curvature_span(setup: &Setup) -> Result<f64> {
    let g = &setup.metric;
    let n = g.dim();
    let est = sample_holonomy(g, &family(setup)?, setup.backend)?;
    let cb = curvature_pack(g, &setup.base, &Ctx::new(g.dom(), setup.backend))?;
    let e = &est.frame;
    let mut rows = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let m = Mat::from_fn(n, n, |k, l| cb.r(i, j, k, l));
            rows.extend_from_slice(e.transpose().mul(&m).mul(e).data());
        }
    }
    let count = n * (n - 1) / 2;
    let a = DMatrix::from_row_slice(count, n * n, &rows);
    let sv = a.singular_values();
    let top = sv.iter().fold(0.0f64, |a, &s| a.max(s));
    let span = sv.iter().filter(|&&s| s > (1e-5 * top).max(1e-9)).count();
    Ok(span.saturating_sub(est.algebra_dim) as f64)
}

fn label_mismatch(setup: &Setup) -> Result<f64> {
    let want = setup.cfg.expect_label.expect("validated");
    let got = classify(&setup.metric, &setup.base, &classify_opts(setup))?.label;
    Ok(if got == want { 0.0 } else { 1.0 })
}

fn warped_cases(setup: &Setup) -> Result<Vec<TripleWarpedPair>> {
    match &setup.cfg.sweep {
        Some(sw) => {
            let mut rng = setup.rng(7);
            (0..sw.count).map(|_| build(&random_triple_warped(&mut rng, 5))).collect()
        }
        None => Ok(vec![setup.warped.clone().expect("validated")]),
    }
}

fn warped_check(setup: &Setup, id: &str) -> Result<f64> {
    let cases = warped_cases(setup)?;
    let opts = classify_opts(setup);
    let backend = setup.backend;
    let combine_min = id == "warped.middle-positive";
    let mut acc = if combine_min { f64::INFINITY } else { 0.0f64 };
    for pair in &cases {
        let grid = pair.dom().grid_points();
        let v = match id {
            "warped.conjugate-identity" => conjugate_identity_check(pair),
            "warped.parallel-t1" => max_over(&grid, |x| {
                crate::holonomy::distribution_parallel_residual(&pair.g, &pair.t1, x, backend)
            })?,
            "warped.parallel-t3" => {
                let t3 = pair.t3.with_metric(&pair.tilde);
                max_over(&grid, |x| crate::holonomy::distribution_parallel_residual(&pair.tilde, &t3, x, backend))?
            }
            "warped.reducible" => {
                let a = classify(&pair.g, &pair.dom().center(), &opts)?.label;
                let b = classify(&pair.tilde, &pair.dom().center(), &opts)?.label;
                [a, b].iter().filter(|&&l| l != HolonomyLabel::Reducible).count() as f64
            }
            "warped.reconstruction" | "warped.round-trip" | "warped.route-agreement" | "warped.middle-positive" => {
                let rec = recover_factors(&pair.g, &pair.tilde, &pair.t1, &pair.t3, &pair.phi, &grid)?;
                match id {
                    "warped.reconstruction" => rec.reconstruction,
                    "warped.round-trip" => input_defect(pair, &rec),
                    "warped.route-agreement" => rec.route_defect,
                    _ => rec.t2_min_eigenvalue,
                }
            }
            "warped.alignment" => max_over(&grid, |x| {
                let a = pair_alignment(pair, x, backend)?;
                Ok(a.dphi_wedge_t12.max(a.m2_defect).max(a.dphi_on_t3))
            })?,
            "warped.detected-split" => {
                let split = detect_split(pair, &opts)?;
                let pts: Vec<Vec<f64>> = grid.iter().step_by(grid.len().div_ceil(8)).cloned().collect();
                let rec = recover_factors(&pair.g, &pair.tilde, &split.t1, &split.t3, &pair.phi, &pts)?;
                rec.reconstruction.max(input_defect(pair, &rec))
            }
            other => unreachable!("not a warped check: {other}"),
        };
        acc = if combine_min { acc.min(v) } else { acc.max(v) };
    }
    Ok(acc)
}

pub fn run(setup: &Setup, id: &str) -> Result<f64> {
    match id {
        "chart.backend-agreement" => backend_agreement(setup),
        "chart.torus-divergence" => torus_divergence(setup),
        "curvature.riemann-symmetries" => riemann_symmetries(setup),
        "conformal.connection-law" => conformal_law(setup, connection_law_residual),
        "conformal.trace-free-ricci-law" => conformal_law(setup, trace_free_ricci_residual),
        "conformal.scalar-law" => conformal_law(setup, |p, x, c| Ok(scalar_law_residual(p, x, c, None)?.r1)),
        "conformal.parallel-field-scalar" => parallel_field_scalar(setup),
        "conformal.non-parallel-detected" => non_parallel_detected(setup),
        "conformal.einstein-trace-free-ricci" => einstein(setup, 0),
        "conformal.einstein-divergence-form" => einstein(setup, 1),
        "conformal.gradient-field-conformal" => gradient_conformal(setup, false),
        "conformal.gradient-field-non-killing" => gradient_conformal(setup, true),
        "exterior.transport-d" => form_transport(setup, TransportPart::D),
        "exterior.transport-nabla" => form_transport(setup, TransportPart::Nabla),
        "exterior.transport-delta" => form_transport(setup, TransportPart::Delta),
        "exterior.twistor-preserved" => form_transport(setup, TransportPart::Twistor),
        "exterior.parallel-form-twistor" => parallel_form_twistor(setup),
        "exterior.hodge-involution" => hodge_identity(setup, false),
        "exterior.hodge-wedge-interior" => hodge_identity(setup, true),
        "exterior.codifferential-routes" => codifferential_routes(setup),
        "holonomy.flat-trivial" => Ok(sample_holonomy(&setup.metric, &family(setup)?, setup.backend)?.algebra_dim as f64),
        "holonomy.sphere-area" => sphere_area(setup),
        "holonomy.metric-preservation" => {
            Ok(sample_holonomy(&setup.metric, &family(setup)?, setup.backend)?.orthogonality_defect)
        }
        "holonomy.block-leakage" => block_leakage(setup),
        "holonomy.curvature-span" => curvature_span(setup),
        "holonomy.label" => label_mismatch(setup),
        id if id.starts_with("warped.") => warped_check(setup, id),
        other => Err(Error::DerivativeFailure(format!("no runner for check {other}"))),
    }
}
