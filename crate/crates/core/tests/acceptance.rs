//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6, PI};
use std::time::{Duration, Instant};

use capillary_core::flows::{coverage_check, run_flow};
use capillary_core::geodesics::{
    exp_f, hyperbolic_geodesic, integrate_alpha_geodesic, sectional_curvature, sphere_convexity, DEFAULT_STEP,
};
use capillary_core::surfaces::{cap, perturb};
use capillary_core::verify::{hk_ball, hk_free_boundary, hk_halfspace, minkowski_check, observed_order, sweep};
use capillary_core::{
    AmbientPoint, CapKind, DiscreteHypersurface, FlowMode, MetricSpec, NavigationData, Perturbation, SurfaceMode,
    Vector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const THETAS: [f64; 4] = [FRAC_PI_6, FRAC_PI_3, FRAC_PI_2, 2.0 * FRAC_PI_3];
const RESOLUTIONS: [usize; 4] = [64, 128, 256, 512];

const IDENTITY_TOL: f64 = 1e-9;
const GEODESIC_TOL: f64 = 1e-6;
const CURVATURE_CLOSED_TOL: f64 = 1e-5;
const CURVATURE_FD_TOL: f64 = 1e-4;
const HK_REL_TOL: f64 = 1e-3;
const MIN_ORDER: f64 = 1.9;
const NEGATIVE_CONTROL_FLOOR: f64 = 1e-2;
const COVERAGE_MIN: f64 = 0.995;
const COVERAGE_SAMPLES: usize = 10_000;
/// Relative errors at or below this are roundoff and carry no order.
const ORDER_FLOOR: f64 = 1e-12;

struct Outcome {
    pass: bool,
    detail: String,
}

fn criterion(id: usize, name: &str, limit: Duration, body: fn() -> Outcome) -> bool {
    let start = Instant::now();
    let out = body();
    let elapsed = start.elapsed();
    let in_time = elapsed <= limit;
    let pass = out.pass && in_time;
    println!(
        "criterion {id} {name}: {} ({:.2} s, limit {} s) {}",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs(),
        out.detail
    );
    pass
}

fn main() {
    let results = [
        criterion(1, "navigation identities", Duration::from_secs(1), navigation_identities),
        criterion(2, "geodesic oracles", Duration::from_secs(10), geodesic_oracles),
        criterion(3, "sectional curvature", Duration::from_secs(5), curvature),
        criterion(4, "half-space equality", Duration::from_secs(10), halfspace_equality),
        criterion(5, "ball inequality", Duration::from_secs(60), ball_inequality),
        criterion(6, "Minkowski identity", Duration::from_secs(10), minkowski),
        criterion(7, "flow monotonicity", Duration::from_secs(60), flow_monotonicity),
        criterion(8, "coverage", Duration::from_secs(60), coverage),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vector {
    loop {
        let v = Vector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        if v.norm() > 0.1 {
            return v;
        }
    }
}

fn random_point(rng: &mut ChaCha8Rng, dim: usize, floor: f64) -> AmbientPoint {
    let mut c = Vector::from_fn(dim, |_, _| rng.gen_range(-0.5..0.5));
    c[dim - 1] = floor + rng.gen_range(0.1..2.0);
    AmbientPoint::new(c).unwrap()
}

fn navigation_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = [0.0f64; 6];
    let mut failures = 0usize;
    for theta0 in THETAS {
        let c = theta0.cos();
        for k in 0..1000 {
            let n = 2 + k % 2;
            let nd = NavigationData::ball(theta0, n).unwrap();
            let x = random_point(&mut rng, n + 1, c.abs());
            let g = MetricSpec::Hyperbolic.matrix(&x).unwrap();
            let wind = nd.wind().clone();
            let xi = random_vector(&mut rng, n + 1);
            let f = nd.randers_eval(&x, &xi).unwrap().f;
            // Navigation identity.
            worst[0] = worst[0].max(nd.navigation_residual(&x, &xi).unwrap().abs());
            // g-unit V <-> F(V - v0) = 1.
            let raw = random_vector(&mut rng, n + 1);
            let v = &raw / (g.clone() * &raw).dot(&raw).sqrt();
            let zeta = &v - &wind;
            worst[1] = worst[1].max((nd.randers_eval(&x, &zeta).unwrap().f - 1.0).abs());
            // Orthogonality of the fundamental tensor along zeta.
            let w_raw = random_vector(&mut rng, n + 1);
            let gv = &g * &v;
            let w = &w_raw - &v * (gv.dot(&w_raw) / gv.dot(&v));
            let gf = nd.fundamental_tensor(&x, &zeta).unwrap();
            worst[2] = worst[2].max((&gf * &zeta).dot(&w).abs() / w.norm());
            // Closed-form Legendre transform of zeta.
            let l = nd.legendre(&x, &zeta).unwrap();
            let closed = nd.lower_index(&x, &v).unwrap() / (1.0 - gv.dot(&wind));
            worst[3] = worst[3].max((&l - &closed).norm() / closed.norm());
            // Legendre round trip and F = F* o l.
            let lxi = nd.legendre(&x, &xi).unwrap();
            match nd.legendre_dual(&x, &lxi) {
                Ok(back) => worst[4] = worst[4].max((&back - &xi).norm() / xi.norm()),
                Err(_) => failures += 1,
            }
            worst[4] = worst[4].max((nd.dual_gauge(&x, &lxi).unwrap() - f).abs() / f);
            // DF* at the lowered sea-unit vector is zeta.
            let flat = nd.lower_index(&x, &v).unwrap();
            let h = 1e-5 * flat.norm();
            let grad = Vector::from_fn(n + 1, |i, _| {
                let mut up = flat.clone();
                let mut dn = flat.clone();
                up[i] += h;
                dn[i] -= h;
                (nd.dual_gauge(&x, &up).unwrap() - nd.dual_gauge(&x, &dn).unwrap()) / (2.0 * h)
            });
            worst[5] = worst[5].max((&grad - &zeta).norm() / zeta.norm());
        }
    }
    let pass = failures == 0 && worst.iter().all(|w| *w <= IDENTITY_TOL);
    Outcome {
        pass,
        detail: format!(
            "navigation {:.1e}, unit sphere {:.1e}, tensor row {:.1e}, closed Legendre {:.1e}, duality {:.1e}, dual gradient {:.1e}, inversion failures {failures} (tol {IDENTITY_TOL:e})",
            worst[0], worst[1], worst[2], worst[3], worst[4], worst[5]
        ),
    }
}

fn geodesic_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let hyperbolic = MetricSpec::alpha(FRAC_PI_2);
    let mut oracle_err = 0.0f64;
    for k in 0..40 {
        let dim = 2 + k % 3;
        let p = random_point(&mut rng, dim, 0.5);
        let raw = random_vector(&mut rng, dim);
        let v = &raw * (p.height() / raw.norm());
        let path = integrate_alpha_geodesic(&hyperbolic, &p, &v, 1.0, DEFAULT_STEP).unwrap();
        for s in &path.samples {
            let (exact, _) = hyperbolic_geodesic(&p, &v, s.t).unwrap();
            oracle_err = oracle_err.max((&s.x - exact).norm());
        }
    }

    let mut spray_err = 0.0f64;
    let times: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
    for (theta0, n) in [(FRAC_PI_3, 2), (2.0 * FRAC_PI_3, 2), (FRAC_PI_6, 1), (FRAC_PI_3, 3)] {
        let nd = NavigationData::ball(theta0, n).unwrap();
        for _ in 0..3 {
            let mut c = Vector::from_fn(n + 1, |_, _| rng.gen_range(-0.3..0.3));
            c[n] = theta0.cos().abs() + rng.gen_range(0.8..1.2);
            let p = AmbientPoint::new(c).unwrap();
            let mut dir = random_vector(&mut rng, n + 1);
            dir[n] = dir[n].abs();
            let zeta = common::finsler_unit(&nd, &p, &dir);
            let spray = common::spray_path(&nd, p.coords(), &zeta, &times, 1e-3);
            for (t, s) in times.iter().zip(&spray) {
                let e = exp_f(&nd, &p, &zeta, *t).unwrap();
                spray_err = spray_err.max((e.coords() - s).norm());
            }
        }
    }
    Outcome {
        pass: oracle_err <= GEODESIC_TOL && spray_err <= GEODESIC_TOL,
        detail: format!("hyperbolic oracle {oracle_err:.1e}, spray vs reparameterized {spray_err:.1e} (tol {GEODESIC_TOL:e})"),
    }
}

fn curvature() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut closed_err = 0.0f64;
    let mut fd_err = 0.0f64;
    let mut largest = f64::NEG_INFINITY;
    let mut samples = 0;
    while samples < 1000 {
        let theta0 = THETAS[samples % THETAS.len()];
        let m = MetricSpec::alpha(theta0);
        let dim = 3 + samples % 2;
        let x = random_point(&mut rng, dim, theta0.cos().abs() + 0.1);
        let i = rng.gen_range(0..dim);
        let j = rng.gen_range(0..dim);
        if i == j {
            continue;
        }
        let rep = sectional_curvature(&m, &x, (i, j)).unwrap();
        if i < dim - 1 && j < dim - 1 {
            closed_err = closed_err.max((rep.k_closed_form + 1.0).abs());
            fd_err = fd_err.max((rep.k_finite_difference + 1.0).abs());
        }
        largest = largest.max(rep.k_closed_form).max(rep.k_finite_difference);
        samples += 1;
    }
    let mut convex = true;
    for theta0 in [FRAC_PI_6, FRAC_PI_4, FRAC_PI_3, FRAC_PI_2, 2.0 * FRAC_PI_3] {
        let limit = theta0.cos().abs().acos();
        for k in 1..50 {
            let phi = limit * k as f64 / 50.0;
            let s = sphere_convexity(theta0, phi).unwrap();
            convex &= s.c > 0.0 && s.ii_phiphi > 0.0 && s.ii_betabeta > 0.0;
        }
    }
    let c = sphere_convexity(FRAC_PI_3, FRAC_PI_4).unwrap().c;
    let c_exact = (c - 2.0).abs() <= 4.0 * f64::EPSILON * 2.0;
    Outcome {
        pass: closed_err <= CURVATURE_CLOSED_TOL && fd_err <= CURVATURE_FD_TOL && largest < 0.0 && convex && c_exact,
        detail: format!(
            "horizontal planes |K+1| closed {closed_err:.1e} (tol {CURVATURE_CLOSED_TOL:e}), finite difference {fd_err:.1e} (tol {CURVATURE_FD_TOL:e}), largest K {largest:.3}, sphere convex {convex}, C(pi/3, pi/4) = {c}"
        ),
    }
}

/// Relative errors against `exact` at every resolution.
fn relative_errors(values: &[(usize, f64)], exact: f64) -> Vec<(usize, f64)> {
    values.iter().map(|&(m, v)| (m, (v - exact).abs() / exact.abs())).collect()
}

fn order_text(order: Option<f64>) -> String {
    order.map_or("roundoff".into(), |p| format!("{p:.2}"))
}

fn order_ok(order: Option<f64>) -> bool {
    order.map_or(true, |p| p >= MIN_ORDER)
}

fn halfspace_equality() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (theta0, exact) in [(FRAC_PI_2, PI), (FRAC_PI_3, 5.0 * PI / 16.0)] {
        let reports = sweep(&RESOLUTIONS, |m| {
            let s = cap(CapKind::HalfspaceCapillary, SurfaceMode::Axisymmetric, 2, theta0, 1.0, m)?;
            hk_halfspace(&s, theta0)
        })
        .unwrap();
        let lhs = relative_errors(&reports.iter().map(|r| (r.resolution, r.lhs)).collect::<Vec<_>>(), exact);
        let rhs = relative_errors(&reports.iter().map(|r| (r.resolution, r.rhs)).collect::<Vec<_>>(), exact);
        let (lo, ro) = (observed_order(&lhs, ORDER_FLOOR), observed_order(&rhs, ORDER_FLOOR));
        let (le, re) = (lhs[3].1, rhs[3].1);
        pass &= le <= HK_REL_TOL && re <= HK_REL_TOL && order_ok(lo) && order_ok(ro);
        parts.push(format!(
            "theta0 {theta0:.4}: lhs err {le:.1e} order {}, rhs err {re:.1e} order {}",
            order_text(lo),
            order_text(ro)
        ));
    }
    Outcome {
        pass,
        detail: format!("{} (tol {HK_REL_TOL:e}, order >= {MIN_ORDER})", parts.join("; ")),
    }
}

fn ball_cap(kind: CapKind, mode: SurfaceMode, theta0: f64, m: usize) -> capillary_core::Result<DiscreteHypersurface> {
    cap(kind, mode, 2, theta0, 0.3, m)
}

fn ball_inequality() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let cases = [
        (CapKind::BallCapillary, SurfaceMode::Axisymmetric, FRAC_PI_3),
        (CapKind::BallCapillary, SurfaceMode::Axisymmetric, 2.0 * FRAC_PI_3),
        (CapKind::BallCapillary, SurfaceMode::Curve2d, FRAC_PI_3),
        (CapKind::BallFreeBoundary, SurfaceMode::Axisymmetric, FRAC_PI_2),
    ];
    for (kind, mode, theta0) in cases {
        let reports = sweep(&RESOLUTIONS, |m| {
            let s = ball_cap(kind, mode, theta0, m)?;
            if kind == CapKind::BallFreeBoundary {
                hk_free_boundary(&s)
            } else {
                hk_ball(&s, theta0)
            }
        })
        .unwrap();
        let rel: Vec<(usize, f64)> = reports.iter().map(|r| (r.resolution, r.relative_deficit())).collect();
        let order = observed_order(&rel, ORDER_FLOOR);
        let fine = rel[3].1.abs();
        pass &= fine <= HK_REL_TOL && order_ok(order);
        parts.push(format!(
            "{kind:?}/{mode:?} theta0 {theta0:.4}: |deficit|/rhs {fine:.1e} order {}",
            order_text(order)
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut admissible = 0;
    let mut attempts = 0;
    let mut smallest = f64::INFINITY;
    while admissible < 20 && attempts < 200 {
        attempts += 1;
        let theta0 = rng.gen_range(0.35 * PI..0.65 * PI);
        let radius = rng.gen_range(0.25..0.4);
        let p = Perturbation {
            amplitude: rng.gen_range(2e-3..6e-3),
            frequency: rng.gen_range(1..=2),
            seed: rng.gen(),
        };
        let Ok(s) = cap(CapKind::BallCapillary, SurfaceMode::Axisymmetric, 2, theta0, radius, 256)
            .and_then(|s| perturb(&s, p))
        else {
            continue;
        };
        let Ok(rep) = hk_ball(&s, theta0) else { continue };
        admissible += 1;
        smallest = smallest.min(rep.deficit / rep.rhs);
    }
    pass &= admissible == 20 && smallest > 0.0;
    parts.push(format!("perturbed caps {admissible}/20 admissible, smallest deficit/rhs {smallest:.2e}"));
    Outcome {
        pass,
        detail: format!("{} (tol {HK_REL_TOL:e}, order >= {MIN_ORDER})", parts.join("; ")),
    }
}

fn minkowski() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for theta0 in [FRAC_PI_3, FRAC_PI_2, 2.0 * FRAC_PI_3] {
        let rows = sweep(&RESOLUTIONS, |m| {
            let s = ball_cap(CapKind::BallCapillary, SurfaceMode::Axisymmetric, theta0, m)?;
            let good = minkowski_check(&s, theta0)?;
            let bad = minkowski_check(&s, theta0 + 0.3)?;
            Ok((m, good.residual.abs() / good.scale, bad.residual.abs() / bad.scale))
        })
        .unwrap();
        let good: Vec<(usize, f64)> = rows.iter().map(|r| (r.0, r.1)).collect();
        let order = observed_order(&good, ORDER_FLOOR);
        let control = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
        pass &= order_ok(order) && control >= NEGATIVE_CONTROL_FLOOR;
        parts.push(format!(
            "theta0 {theta0:.4}: residual {:.1e} at 512, order {}, mismatched control >= {control:.2e}",
            rows[3].1,
            order_text(order)
        ));
    }
    Outcome {
        pass,
        detail: format!("{} (order >= {MIN_ORDER}, control >= {NEGATIVE_CONTROL_FLOOR:e})", parts.join("; ")),
    }
}

fn flow_inputs() -> Vec<(&'static str, DiscreteHypersurface, FlowMode, bool)> {
    let fb = cap(CapKind::BallFreeBoundary, SurfaceMode::Axisymmetric, 2, FRAC_PI_2, 0.4, 128).unwrap();
    let cb = cap(CapKind::BallCapillary, SurfaceMode::Axisymmetric, 2, FRAC_PI_3, 0.3, 128).unwrap();
    let hs = cap(CapKind::HalfspaceCapillary, SurfaceMode::Axisymmetric, 2, FRAC_PI_3, 1.0, 128).unwrap();
    let bump = |s: &DiscreteHypersurface, seed| {
        perturb(s, Perturbation { amplitude: 2e-3, frequency: 2, seed }).unwrap()
    };
    vec![
        ("free-boundary cap", fb.clone(), FlowMode::FreeBoundaryBall, true),
        ("capillary ball cap", cb.clone(), FlowMode::CapillaryBall, true),
        ("half-space cap", hs.clone(), FlowMode::CapillaryHalfspace, true),
        ("perturbed free-boundary", bump(&fb, 7), FlowMode::FreeBoundaryBall, false),
        ("perturbed capillary ball", bump(&cb, 11), FlowMode::CapillaryBall, false),
        ("perturbed half-space", bump(&hs, 13), FlowMode::CapillaryHalfspace, false),
    ]
}

fn flow_monotonicity() -> Outcome {
    use rayon::prelude::*;
    let inputs = flow_inputs();
    let rows: Vec<(String, bool)> = inputs
        .par_iter()
        .map(|(name, s, mode, is_cap)| {
            let run = match run_flow(s, *mode, None, 10.0) {
                Ok(r) => r,
                Err(e) => return (format!("{name}: error {e}"), false),
            };
            let tol = run.tolerance();
            let mono = run.monotonicity_violation();
            let mut ok = mono <= tol;
            let mut text = format!("{name}: rise {mono:.1e}");
            if *is_cap {
                let eq = run.equality_residual();
                ok &= eq <= tol;
                text += &format!(", equality {eq:.1e}");
            }
            if *is_cap && *mode == FlowMode::CapillaryHalfspace {
                let focal = run.first_focal_time.unwrap_or(f64::NAN);
                ok &= (focal - 1.0).abs() <= run.dt;
                text += &format!(", focal {focal:.4} vs R = 1 +- {:.4}", run.dt);
            }
            (format!("{text} (tol {tol:.1e})"), ok)
        })
        .collect();
    Outcome {
        pass: rows.iter().all(|r| r.1),
        detail: rows.iter().map(|r| r.0.clone()).collect::<Vec<_>>().join("; "),
    }
}

fn coverage() -> Outcome {
    use rayon::prelude::*;
    let cases = [
        (CapKind::BallFreeBoundary, FlowMode::FreeBoundaryBall, FRAC_PI_2, 0.4),
        (CapKind::BallCapillary, FlowMode::CapillaryBall, FRAC_PI_3, 0.3),
        (CapKind::HalfspaceCapillary, FlowMode::CapillaryHalfspace, FRAC_PI_3, 1.0),
    ];
    let rows: Vec<(String, bool)> = cases
        .par_iter()
        .map(|&(kind, mode, theta0, radius)| {
            let frac = |m| {
                cap(kind, SurfaceMode::Axisymmetric, 2, theta0, radius, m)
                    .and_then(|s| coverage_check(&s, mode, COVERAGE_SAMPLES, None, 8))
                    .map(|r| r.fraction)
            };
            match (frac(128), frac(256)) {
                (Ok(coarse), Ok(fine)) => (
                    format!("{mode:?}: {coarse:.4} at 128, {fine:.4} at 256"),
                    fine >= COVERAGE_MIN && fine >= coarse,
                ),
                (a, b) => (format!("{mode:?}: error {:?} {:?}", a.err(), b.err()), false),
            }
        })
        .collect();
    Outcome {
        pass: rows.iter().all(|r| r.1),
        detail: format!(
            "{} (need >= {COVERAGE_MIN} at 256 and non-decreasing)",
            rows.iter().map(|r| r.0.clone()).collect::<Vec<_>>().join("; ")
        ),
    }
}
