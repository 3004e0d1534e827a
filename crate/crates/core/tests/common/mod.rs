//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use capillary_core::{AmbientPoint, Matrix, NavigationData, Vector};

const FD_STEP: f64 = 2e-4;

fn lagrangian(nd: &NavigationData, x: &Vector, xi: &Vector) -> f64 {
    let p = AmbientPoint::new(x.clone()).expect("point");
    let f = nd.randers_eval(&p, xi).expect("gauge").f;
    0.5 * f * f
}

fn bump(v: &Vector, k: usize, s: f64) -> Vector {
    let mut w = v.clone();
    w[k] += s;
    w
}

/// Acceleration of the Randers geodesic spray, from the Euler-Lagrange
/// equations of `F^2/2` with every derivative taken by central differences
/// of the gauge value alone.
pub fn spray_acceleration(nd: &NavigationData, x: &Vector, xi: &Vector) -> Vector {
    let dim = x.len();
    let h = FD_STEP;
    let l = |y: &Vector, e: &Vector| lagrangian(nd, y, e);
    let mut hess = Matrix::zeros(dim, dim);
    let mut mixed = Matrix::zeros(dim, dim);
    let mut grad_x = Vector::zeros(dim);
    for i in 0..dim {
        grad_x[i] = (l(&bump(x, i, h), xi) - l(&bump(x, i, -h), xi)) / (2.0 * h);
        for j in 0..dim {
            hess[(i, j)] = (l(x, &bump(&bump(xi, i, h), j, h)) - l(x, &bump(&bump(xi, i, h), j, -h))
                - l(x, &bump(&bump(xi, i, -h), j, h))
                + l(x, &bump(&bump(xi, i, -h), j, -h)))
                / (4.0 * h * h);
            mixed[(i, j)] = (l(&bump(x, j, h), &bump(xi, i, h)) - l(&bump(x, j, -h), &bump(xi, i, h))
                - l(&bump(x, j, h), &bump(xi, i, -h))
                + l(&bump(x, j, -h), &bump(xi, i, -h)))
                / (4.0 * h * h);
        }
    }
    let rhs = grad_x - mixed * xi;
    hess.lu().solve(&rhs).expect("fundamental tensor is invertible")
}

/// Integrate the spray with classical RK4 at a fixed step and return the
/// positions at the requested times (which must be multiples of `step`).
pub fn spray_path(nd: &NavigationData, p: &Vector, zeta: &Vector, times: &[f64], step: f64) -> Vec<Vector> {
    let mut x = p.clone();
    let mut v = zeta.clone();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let steps = ((target - t) / step).round() as usize;
        for _ in 0..steps {
            let k1x = v.clone();
            let k1v = spray_acceleration(nd, &x, &v);
            let k2x = &v + &k1v * (0.5 * step);
            let k2v = spray_acceleration(nd, &(&x + &k1x * (0.5 * step)), &k2x);
            let k3x = &v + &k2v * (0.5 * step);
            let k3v = spray_acceleration(nd, &(&x + &k2x * (0.5 * step)), &k3x);
            let k4x = &v + &k3v * step;
            let k4v = spray_acceleration(nd, &(&x + &k3x * step), &k4x);
            x += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (step / 6.0);
            v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (step / 6.0);
        }
        t = target;
        out.push(x.clone());
    }
    out
}

/// `F`-unit vector along `dir` at `p`.
pub fn finsler_unit(nd: &NavigationData, p: &AmbientPoint, dir: &Vector) -> Vector {
    let f = nd.randers_eval(p, dir).expect("gauge").f;
    dir / f
}
