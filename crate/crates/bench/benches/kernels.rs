use std::f64::consts::FRAC_PI_3;
use std::hint::black_box;

use capillary_bench::{ball_cap, halfspace_cap};
use capillary_core::flows::flow_step;
use capillary_core::geodesics::exp_f;
use capillary_core::verify::{hk_ball, hk_halfspace};
use capillary_core::{AmbientPoint, FlowMode, FlowState, NavigationData, Vector};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn geometry(c: &mut Criterion) {
    let mut g = c.benchmark_group("geometry");
    for m in [128, 512] {
        let s = ball_cap(m);
        g.bench_with_input(BenchmarkId::from_parameter(m), &s, |b, s| b.iter(|| s.geometry().unwrap()));
    }
    g.finish();
}

fn hk(c: &mut Criterion) {
    let mut g = c.benchmark_group("hk");
    for m in [128, 512] {
        let ball = ball_cap(m);
        let half = halfspace_cap(m);
        g.bench_with_input(BenchmarkId::new("ball", m), &ball, |b, s| b.iter(|| hk_ball(s, FRAC_PI_3).unwrap()));
        g.bench_with_input(BenchmarkId::new("halfspace", m), &half, |b, s| {
            b.iter(|| hk_halfspace(s, FRAC_PI_3).unwrap())
        });
    }
    g.finish();
}

fn flow(c: &mut Criterion) {
    let mut g = c.benchmark_group("flow_step");
    for (name, s, mode) in [
        ("ball", ball_cap(256), FlowMode::CapillaryBall),
        ("halfspace", halfspace_cap(256), FlowMode::CapillaryHalfspace),
    ] {
        let state = FlowState::new(&s, mode).unwrap();
        g.bench_function(name, |b| b.iter(|| flow_step(black_box(&state), 1e-3).unwrap()));
    }
    g.finish();
}

fn geodesics(c: &mut Criterion) {
    let nd = NavigationData::ball(FRAC_PI_3, 2).unwrap();
    let p = AmbientPoint::from_slice(&[0.0, 0.0, 1.0]).unwrap();
    let dir = Vector::from_vec(vec![1.0, 0.0, 0.5]);
    let zeta = &dir / nd.randers_eval(&p, &dir).unwrap().f;
    c.bench_function("exp_f", |b| b.iter(|| exp_f(&nd, &p, black_box(&zeta), 1.0).unwrap()));
    let xi = Vector::from_vec(vec![0.3, -0.2, 0.7]);
    let l = nd.legendre(&p, &xi).unwrap();
    c.bench_function("legendre_dual", |b| b.iter(|| nd.legendre_dual(&p, black_box(&l)).unwrap()));
}

criterion_group!(benches, geometry, hk, flow, geodesics);
criterion_main!(benches);
