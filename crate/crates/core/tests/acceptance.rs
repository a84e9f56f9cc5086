//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::collections::BTreeSet;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use confgeom::chart::{Backend, ChartDomain, Ctx, ScalarField};
use confgeom::conformal::{
    conformal_vector_residual, connection_law_residual, einstein_pair_diagnostics, gradient_field, mobius_pair, rescale,
    scalar_law_residual, trace_free_ricci_residual,
};
use confgeom::curvature::MetricField;
use confgeom::error::Error;
use confgeom::expr::{parse, Expr};
use confgeom::exterior::form::multi_indices;
use confgeom::exterior::{
    codifferential, codifferential_hodge, conformal_form_transport, flat, twistor_killing_residual, Form, Weighted,
};
use confgeom::harness::{self, emit_report, Format, RunOptions, REGISTRY};
use confgeom::holonomy::{
    classify, distribution_parallel_residual, sample_holonomy, transport_matrix, ClassifyOptions, Connection,
    HolonomyLabel, LoopFamily, Path, TransportOptions,
};
use confgeom::linalg::Mat;
use confgeom::samples::{product_with_parallel_form, random_conformal_pair, random_form, random_function, random_metric, random_triple_warped};
use confgeom::warped::{build, conjugate_identity_check, recover_factors};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn err(e: Error) -> String {
    e.to_string()
}

fn conformal_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = [[0.0f64; 3]; 2];
    let mut count = 0;
    for n in [2, 3, 4] {
        for _ in 0..18 {
            let pair = random_conformal_pair(&mut rng, n).map_err(err)?;
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.6..0.6)).collect();
            for (b, backend) in [Backend::Dual, Backend::Fd].into_iter().enumerate() {
                let ctx = Ctx::new(pair.dom(), backend);
                let r = [
                    trace_free_ricci_residual(&pair, &x, &ctx).map_err(err)?,
                    scalar_law_residual(&pair, &x, &ctx, None).map_err(err)?.r1,
                    connection_law_residual(&pair, &x, &ctx).map_err(err)?,
                ];
                for k in 0..3 {
                    worst[b][k] = worst[b][k].max(r[k]);
                }
            }
            count += 1;
        }
    }
    let ok = count >= 50 && worst[0].iter().all(|&r| r < 1e-6) && worst[1].iter().all(|&r| r < 1e-4);
    ensure(
        ok,
        format!(
            "{count} pairs; dual (ricci0, scalar, connection) = ({:.1e}, {:.1e}, {:.1e}); fd = ({:.1e}, {:.1e}, {:.1e})",
            worst[0][0], worst[0][1], worst[0][2], worst[1][0], worst[1][1], worst[1][2]
        ),
    )
}

fn twistor_transport() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = [0.0f64; 3];
    let mut count = 0;
    for n in [2, 3, 4, 5] {
        for _ in 0..8 {
            let pair = random_conformal_pair(&mut rng, n).map_err(err)?;
            let p = rng.gen_range(1..=n);
            let psi = random_form(&mut rng, n, p).map_err(err)?;
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.6..0.6)).collect();
            let r = conformal_form_transport(&pair, &psi, &x, &Ctx::dual(pair.dom())).map_err(err)?;
            worst[0] = worst[0].max(r.d);
            worst[1] = worst[1].max(r.nabla);
            worst[2] = worst[2].max(r.delta);
            count += 1;
        }
    }
    let mut parallel: f64 = 0.0;
    let mut parallel_count = 0;
    for n in [2, 3, 4, 5] {
        for k in 1..n {
            let (g, psi) = product_with_parallel_form(&mut rng, n, k).map_err(err)?;
            let phi = random_function(&mut rng, &(0..n).collect::<Vec<_>>(), 0.3);
            let pair = rescale(&g, &ScalarField::new(phi)).map_err(err)?;
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.6..0.6)).collect();
            let ctx = Ctx::dual(pair.dom());
            let base = twistor_killing_residual(&pair.g, &psi, &x, &ctx).map_err(err)?;
            let tilde_psi = Weighted { phi: &pair.phi.expr, weight: k as f64 + 1.0, inner: &psi };
            let t = twistor_killing_residual(&pair.tilde, &tilde_psi, &x, &ctx).map_err(err)?;
            parallel = parallel.max(t.twistor).max(base.twistor);
            parallel_count += 1;
        }
    }
    let ok = count >= 30 && worst.iter().all(|&r| r < 1e-6) && parallel < 1e-6;
    ensure(
        ok,
        format!(
            "{count} triples; (d, nabla, delta) = ({:.1e}, {:.1e}, {:.1e}); {parallel_count} parallel forms, twistor {:.1e}",
            worst[0], worst[1], worst[2], parallel
        ),
    )
}

fn random_pointwise(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Form<f64> {
    Form::from_coeffs(n, p, multi_indices(n, p).iter().map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn hodge_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut star2, mut wedge): (f64, f64) = (0.0, 0.0);
    for n in 1..=5 {
        for p in 0..=n {
            for _ in 0..4 {
                let a = Mat::from_vec(n, n, (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect());
                let g = a.mul(&a.transpose()).add(&Mat::identity(n));
                let psi = random_pointwise(&mut rng, n, p);
                let sign = if (p * (n - p)) % 2 == 0 { 1.0 } else { -1.0 };
                let twice = psi.hodge(&g, 1.0).and_then(|s| s.hodge(&g, 1.0)).map_err(err)?;
                star2 = star2.max(twice.sub(&psi.scale(sign)).max_abs());
                if p < n {
                    let xv: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let lhs = flat(&g, &xv).wedge(&psi).and_then(|w| w.hodge(&g, 1.0)).map_err(err)?;
                    let rhs = psi.hodge(&g, 1.0).and_then(|s| s.interior(&xv)).map_err(err)?;
                    let rhs = rhs.scale(if p % 2 == 0 { 1.0 } else { -1.0 });
                    wedge = wedge.max(lhs.sub(&rhs).max_abs());
                }
            }
        }
    }
    let mut delta: f64 = 0.0;
    for n in 2..=5 {
        for p in 1..=n {
            let g = random_metric(&mut rng, ChartDomain::cube(n, 1.0, 4).unwrap()).map_err(err)?;
            let psi = random_form(&mut rng, n, p).map_err(err)?;
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let ctx = Ctx::dual(g.dom());
            let a = codifferential(&g, &psi, &x, &ctx).map_err(err)?;
            let b = codifferential_hodge(&g, &psi, &x, &ctx).map_err(err)?;
            delta = delta.max(a.sub(&b).max_abs());
        }
    }
    ensure(
        star2 < 1e-9 && wedge < 1e-9 && delta < 1e-8,
        format!("star twice {star2:.1e}; star of wedge {wedge:.1e}; codifferential routes {delta:.1e}"),
    )
}

fn holonomy_golden() -> Outcome {
    let torus = MetricField::flat(ChartDomain::torus(3, 1.0, 4).unwrap());
    let flat = classify(&torus, &[0.5, 0.5, 0.5], &ClassifyOptions::default()).map_err(err)?;

    let dom = ChartDomain::new(vec![0.2, -3.0], vec![2.9, 3.0], vec![false, false], vec![4, 4]).unwrap();
    let s2 = MetricField::round_sphere(dom).map_err(err)?;
    let conn = Connection::new(&s2, Backend::Dual);
    let mut area_err: f64 = 0.0;
    for (th0, a, b) in [(0.8, 0.4, 0.5), (1.2, 0.2, 0.3), (0.5, 0.6, 1.0)] {
        let path = Path::rectangle(&[th0, 0.0], 0, 1, a, b);
        let p = transport_matrix(&conn, &path, &TransportOptions::default()).map_err(err)?;
        let e = confgeom::chart::coordinate_frame(&s2.matrix(&[th0, 0.0])).map_err(err)?;
        let q = e.inverse().map_err(err)?.mul(&p).mul(&e);
        let angle = q[(1, 0)].atan2(q[(0, 0)]).abs();
        area_err = area_err.max((angle - b * (th0.cos() - (th0 + a).cos())).abs());
    }

    let names: Vec<String> = ["x", "t", "y"].iter().map(|s| s.to_string()).collect();
    let prod = MetricField::diagonal(
        ChartDomain::cube(3, 1.0, 4).unwrap(),
        vec![Expr::one(), Expr::one(), parse("exp(-2*sin(t))", &names).unwrap()],
    )
    .map_err(err)?;
    let x0 = [0.0, 0.2, 0.0];
    let fam = LoopFamily::standard(prod.dom(), &x0, 4, 1).map_err(err)?;
    let est = sample_holonomy(&prod, &fam, Backend::Dual).map_err(err)?;
    let einv = est.frame.inverse().map_err(err)?;
    let mut leak: f64 = 0.0;
    for q in &est.transports {
        let p = est.frame.mul(q).mul(&einv);
        leak = leak.max(p[(0, 1)].abs()).max(p[(0, 2)].abs()).max(p[(1, 0)].abs()).max(p[(2, 0)].abs());
    }
    let label = classify(&prod, &x0, &ClassifyOptions::default()).map_err(err)?.label;
    ensure(
        flat.algebra_dim == 0 && area_err < 1e-3 && leak < 1e-6 && label == HolonomyLabel::Reducible,
        format!(
            "torus dim {}; sphere area error {area_err:.1e}; product leakage {leak:.1e}, label {label}",
            flat.algebra_dim
        ),
    )
}

fn triple_warped() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let opts = ClassifyOptions::default();
    let (mut res_g, mut res_t, mut recon, mut conj): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    let mut labels_ok = 0;
    let specs = 20;
    for _ in 0..specs {
        let pair = build(&random_triple_warped(&mut rng, 5)).map_err(err)?;
        let grid = pair.dom().grid_points();
        let t3 = pair.t3.with_metric(&pair.tilde);
        for x in &grid {
            res_g = res_g.max(distribution_parallel_residual(&pair.g, &pair.t1, x, Backend::Dual).map_err(err)?);
            res_t = res_t.max(distribution_parallel_residual(&pair.tilde, &t3, x, Backend::Dual).map_err(err)?);
        }
        let rec = recover_factors(&pair.g, &pair.tilde, &pair.t1, &pair.t3, &pair.phi, &grid).map_err(err)?;
        recon = recon.max(rec.reconstruction);
        conj = conj.max(conjugate_identity_check(&pair));
        let x0 = pair.dom().center();
        let a = classify(&pair.g, &x0, &opts).map_err(err)?.label;
        let b = classify(&pair.tilde, &x0, &opts).map_err(err)?.label;
        if a == HolonomyLabel::Reducible && b == HolonomyLabel::Reducible {
            labels_ok += 1;
        }
    }
    ensure(
        labels_ok == specs && res_g < 1e-8 && res_t < 1e-8 && recon < 1e-10 && conj == 0.0,
        format!(
            "{labels_ok}/{specs} reducible pairs; parallel T1 {res_g:.1e}, T3 {res_t:.1e}; reconstruction {recon:.1e}; conjugate {conj:e}"
        ),
    )
}

fn einstein_pair() -> Outcome {
    let pair = mobius_pair(ChartDomain::cube(3, 1.0, 4).unwrap(), 1.0).map_err(err)?;
    let ctx = Ctx::dual(pair.dom());
    let xi = gradient_field(&pair, &ctx);
    let (mut ric0, mut ng, mut conf, mut killing) = (0.0f64, 0.0f64, 0.0f64, f64::INFINITY);
    for x in [[0.0, 0.0, 0.0], [0.3, -0.2, 0.5], [-0.7, 0.4, 0.1], [0.9, 0.9, -0.9]] {
        let d = einstein_pair_diagnostics(&pair, &x, &ctx).map_err(err)?;
        ric0 = ric0.max(d.ric0_tilde);
        ng = ng.max(d.ng_residual);
        let (c, k) = conformal_vector_residual(&pair.g, &xi, &x, &ctx).map_err(err)?;
        conf = conf.max(c);
        killing = killing.min(k);
    }
    ensure(
        ric0 < 1e-5 && ng < 1e-5 && conf < 1e-6 && killing > 1e-2,
        format!("ric0 {ric0:.1e}; rewritten form {ng:.1e}; conformal {conf:.1e}; killing {killing:.2}"),
    )
}

fn obstruction() -> Outcome {
    struct Case {
        lo: Vec<f64>,
        hi: Vec<f64>,
        names: Vec<&'static str>,
        diag: Vec<&'static str>,
        phi: &'static str,
        xi: Vec<&'static str>,
        bent: Vec<&'static str>,
        points: Vec<Vec<f64>>,
    }
    let cases = [
        Case {
            lo: vec![0.5, -1.0, -1.0],
            hi: vec![2.0, 1.0, 1.0],
            names: vec!["t", "y", "z"],
            diag: vec!["1", "1", "1"],
            phi: "-log(t)",
            xi: vec!["0", "1", "0"],
            bent: vec!["0", "1 + 0.01*t", "0"],
            points: vec![vec![1.0, 0.0, 0.0], vec![0.7, 0.4, -0.3]],
        },
        Case {
            lo: vec![0.5, -1.0, -1.0, -1.0],
            hi: vec![2.0, 1.0, 1.0, 1.0],
            names: vec!["t", "y", "z", "w"],
            diag: vec!["1", "1", "1", "1"],
            phi: "-log(t)",
            xi: vec!["0", "0", "0", "1"],
            bent: vec!["0", "0", "0.01*t", "1"],
            points: vec![vec![1.2, 0.1, 0.2, 0.3]],
        },
        Case {
            lo: vec![0.5, -1.0, -1.0],
            hi: vec![1.5, 1.0, 1.0],
            names: vec!["r", "a", "y"],
            diag: vec!["4/(exp(r) + exp(-r))^2", "((exp(r) - exp(-r))/(exp(r) + exp(-r)))^2", "1"],
            phi: "log((exp(r) + exp(-r))/2)",
            xi: vec!["0", "0", "1"],
            bent: vec!["0", "0", "1 + 0.01*r"],
            points: vec![vec![1.0, 0.0, 0.0], vec![0.8, 0.3, -0.4]],
        },
    ];
    let mut worst: f64 = 0.0;
    let mut fired = 0;
    let mut evaluated = 0;
    for c in &cases {
        let n = c.lo.len();
        let names: Vec<String> = c.names.iter().map(|s| s.to_string()).collect();
        let p = |s: &str| parse(s, &names).unwrap();
        let dom = ChartDomain::new(c.lo.clone(), c.hi.clone(), vec![false; n], vec![4; n]).unwrap();
        let g = MetricField::diagonal(dom, c.diag.iter().map(|s| p(s)).collect()).map_err(err)?;
        let pair = rescale(&g, &ScalarField::new(p(c.phi))).map_err(err)?;
        let xi: Vec<Expr> = c.xi.iter().map(|s| p(s)).collect();
        let bent: Vec<Expr> = c.bent.iter().map(|s| p(s)).collect();
        let ctx = Ctx::dual(pair.dom());
        for x in &c.points {
            let law = scalar_law_residual(&pair, x, &ctx, Some(&xi)).map_err(err)?;
            match law.obstruction {
                Some(o) => worst = worst.max(o).max(law.r2.unwrap_or(f64::INFINITY)),
                None => return Err(format!("certificate rejected a parallel field at {x:?}")),
            }
            evaluated += 1;
            if let Err(Error::NotParallel { .. }) = scalar_law_residual(&pair, x, &ctx, Some(&bent)) {
                fired += 1;
            }
        }
    }
    ensure(
        worst < 1e-6 && fired == evaluated,
        format!("{evaluated} points, scalar relation residual {worst:.1e}; NotParallel fired {fired}/{evaluated}"),
    )
}

fn determinism_concordance() -> Outcome {
    let mut used = BTreeSet::new();
    for (name, _) in harness::BUILTIN {
        let cfg = harness::builtin(name).unwrap();
        used.extend(cfg.checks.iter().cloned());
    }
    let registered: BTreeSet<String> = REGISTRY.iter().map(|c| c.id.to_string()).collect();
    let unregistered: Vec<&String> = used.difference(&registered).collect();
    let unused: Vec<&String> = registered.difference(&used).collect();

    let bin = env!("CARGO_BIN_EXE_confgeom");
    let run = |args: &[&str]| Command::new(bin).args(args).output().expect("binary runs");
    let mut identical = true;
    let mut exits_ok = true;
    for (name, _) in harness::BUILTIN {
        let a = run(&["verify", name]);
        let b = run(&["verify", name]);
        identical &= a.stdout == b.stdout && !a.stdout.is_empty();
        exits_ok &= a.status.code() == Some(0);
    }
    let cfg = harness::builtin("hodge-identities").unwrap();
    let opts = RunOptions { seed: Some(9), ..RunOptions::default() };
    let r1 = emit_report(&harness::run_scenario(&cfg, &opts).map_err(|e| e.to_string())?, Format::Json);
    let r2 = emit_report(&harness::run_scenario(&cfg, &opts).map_err(|e| e.to_string())?, Format::Json);
    identical &= r1 == r2;

    let table = String::from_utf8(run(&["concordance", "--format", "text"]).stdout).unwrap();
    let mut anchorless = Vec::new();
    let mut listed = 0;
    for line in table.lines() {
        let mut parts = line.splitn(2, char::is_whitespace);
        let id = parts.next().unwrap_or("");
        let anchor = parts.next().unwrap_or("").trim();
        listed += 1;
        if anchor.is_empty() || !registered.contains(id) {
            anchorless.push(id.to_string());
        }
    }
    ensure(
        identical && exits_ok && unregistered.is_empty() && unused.is_empty() && anchorless.is_empty() && listed == REGISTRY.len(),
        format!(
            "byte-identical reports {identical}; all scenarios pass {exits_ok}; {listed} checks listed; anchorless {anchorless:?}; unregistered {unregistered:?}; never exercised {unused:?}"
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("conformal identity suite", conformal_identities),
        ("twistor transport suite", twistor_transport),
        ("Hodge identity suite", hodge_identities),
        ("holonomy golden values", holonomy_golden),
        ("triple warped round trip", triple_warped),
        ("Einstein pair demonstration", einstein_pair),
        ("obstruction sensitivity", obstruction),
        ("determinism and concordance", determinism_concordance),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        match out {
            Ok(msg) => println!("PASS [{}] {name}: {msg} ({secs:.1}s)", k + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL [{}] {name}: {msg} ({secs:.1}s)", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
