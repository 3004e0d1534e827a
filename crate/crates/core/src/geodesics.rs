//! Geodesics of the Riemannian part `alpha` and of the Randers gauge `F`,
//! exact Poincare half-space geodesics, and the curvature and convexity
//! quantities of the `alpha` metric.
//!
//! Since `beta` is closed, `F`-geodesics run along `alpha`-geodesics; they are
//! obtained here by integrating the `alpha` geodesic equation and
//! re-parameterizing by accumulated `F`-length.

use std::io::Write;

use crate::error::{Error, Result};
use crate::metrics::{AmbientPoint, Matrix, MetricSpec, NavigationData, Vector};

/// Default fixed step of the geodesic integrator.
pub const DEFAULT_STEP: f64 = 1e-3;
/// Allowed relative drift of the conserved `alpha`-speed per unit parameter.
pub const SPEED_DRIFT_TOL: f64 = 1e-8;
const MIN_STEP: f64 = 1e-9;
const MAX_STEPS: f64 = 2e7;
const EXIT_RETRIES: usize = 3;
const EXP_F_STEP: f64 = 5e-4;
/// Step of the finite-difference curvature oracle.
pub const CURVATURE_FD_STEP: f64 = 1e-4;

/// Christoffel symbols `Gamma^k_{ij}` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    table: Vec<f64>,
}

impl Christoffel {
    fn zeros(dim: usize) -> Self {
        Christoffel {
            dim,
            table: vec![0.0; dim * dim * dim],
        }
    }

    fn index(&self, k: usize, i: usize, j: usize) -> usize {
        (k * self.dim + i) * self.dim + j
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Gamma^k_{ij}`.
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.table[self.index(k, i, j)]
    }

    fn set(&mut self, k: usize, i: usize, j: usize, value: f64) {
        let idx = self.index(k, i, j);
        self.table[idx] = value;
    }

    /// `Gamma^k_{ij} v^i w^j` as a vector indexed by `k`.
    pub fn contract(&self, v: &Vector, w: &Vector) -> Vector {
        Vector::from_fn(self.dim, |k, _| {
            let mut acc = 0.0;
            for i in 0..self.dim {
                for j in 0..self.dim {
                    acc += self.get(k, i, j) * v[i] * w[j];
                }
            }
            acc
        })
    }

    /// Indices `(k, i, j)` with a nonzero entry.
    pub fn nonzero(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for k in 0..self.dim {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    if self.get(k, i, j) != 0.0 {
                        out.push((k, i, j));
                    }
                }
            }
        }
        out
    }
}

/// Closed-form Christoffel symbols of a diagonal metric
/// `A(z) sum dx_i^2 + B(z) dz^2`: the only nonzero families are
/// `Gamma^{z}_{ii} = -A'/(2B)`, `Gamma^i_{iz} = A'/(2A)` and
/// `Gamma^z_{zz} = B'/(2B)`.
pub fn christoffel(m: &MetricSpec, x: &AmbientPoint) -> Result<Christoffel> {
    let z = x.height();
    let (a, b) = m.coefficients(z)?;
    let (da, db) = m.coefficient_derivatives_unchecked(z);
    let dim = x.dim();
    let last = dim - 1;
    let mut table = Christoffel::zeros(dim);
    if da == 0.0 && db == 0.0 {
        return Ok(table);
    }
    for i in 0..last {
        table.set(last, i, i, -0.5 * da / b);
        table.set(i, i, last, 0.5 * da / a);
        table.set(i, last, i, 0.5 * da / a);
    }
    table.set(last, last, last, 0.5 * db / b);
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathMetric {
    Alpha,
    Finsler,
    HyperbolicExact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Parameterization {
    Affine,
    UnitFinslerSpeed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub t: f64,
    pub x: Vector,
    pub v: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicPath {
    pub samples: Vec<PathSample>,
    pub metric: PathMetric,
    pub parameterization: Parameterization,
    /// Step actually used after halving.
    pub step: f64,
}

impl GeodesicPath {
    pub fn end(&self) -> &PathSample {
        self.samples.last().expect("paths hold at least the initial sample")
    }

    /// Write `t, x1, ..., x_{n+1}` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let dim = self.samples.first().map_or(0, |s| s.x.len());
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=dim).map(|i| format!("x{i}")))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for s in &self.samples {
            let row: Vec<String> = std::iter::once(format!("{:.12e}", s.t))
                .chain(s.x.iter().map(|c| format!("{c:.12e}")))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Geodesic acceleration `-Gamma(x)(v, v)` of a diagonal metric.
fn diagonal_acceleration(m: &MetricSpec, x: &Vector, v: &Vector) -> Vector {
    let last = x.len() - 1;
    let z = x[last];
    let (a, b) = m.coefficients_unchecked(z);
    let (da, db) = m.coefficient_derivatives_unchecked(z);
    let horizontal: f64 = (0..last).map(|i| v[i] * v[i]).sum();
    let mut acc = Vector::zeros(x.len());
    for i in 0..last {
        acc[i] = -(da / a) * v[i] * v[last];
    }
    acc[last] = 0.5 * (da / b) * horizontal - 0.5 * (db / b) * v[last] * v[last];
    acc
}

fn speed_sq(m: &MetricSpec, x: &Vector, v: &Vector) -> f64 {
    let last = x.len() - 1;
    let (a, b) = m.coefficients_unchecked(x[last]);
    let horizontal: f64 = (0..last).map(|i| v[i] * v[i]).sum();
    a * horizontal + b * v[last] * v[last]
}

fn rk4_geodesic(m: &MetricSpec, x: &Vector, v: &Vector, h: f64) -> (Vector, Vector) {
    let k1x = v.clone();
    let k1v = diagonal_acceleration(m, x, v);
    let x2 = x + &k1x * (0.5 * h);
    let v2 = v + &k1v * (0.5 * h);
    let k2v = diagonal_acceleration(m, &x2, &v2);
    let x3 = x + &v2 * (0.5 * h);
    let v3 = v + &k2v * (0.5 * h);
    let k3v = diagonal_acceleration(m, &x3, &v3);
    let x4 = x + &v3 * h;
    let v4 = v + &k3v * h;
    let k4v = diagonal_acceleration(m, &x4, &v4);
    let xn = x + (k1x + &v2 * 2.0 + &v3 * 2.0 + &v4) * (h / 6.0);
    let vn = v + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
    (xn, vn)
}

fn integrate_fixed(
    m: &MetricSpec,
    p: &AmbientPoint,
    v: &Vector,
    t_end: f64,
    step: f64,
) -> Result<(Vec<PathSample>, f64)> {
    let steps = (t_end / step).ceil().max(1.0) as usize;
    let h = t_end / steps as f64;
    let mut x = p.coords().clone();
    let mut vel = v.clone();
    let s0 = speed_sq(m, &x, &vel).sqrt();
    let mut drift: f64 = 0.0;
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(PathSample {
        t: 0.0,
        x: x.clone(),
        v: vel.clone(),
    });
    for k in 0..steps {
        let (xn, vn) = rk4_geodesic(m, &x, &vel, h);
        let t = (k + 1) as f64 * h;
        if m.check_height(xn[xn.len() - 1]).is_err() || xn.iter().chain(vn.iter()).any(|c| !c.is_finite()) {
            return Err(Error::DomainExit { time: t });
        }
        x = xn;
        vel = vn;
        drift = drift.max((speed_sq(m, &x, &vel).sqrt() - s0).abs() / s0);
        samples.push(PathSample {
            t,
            x: x.clone(),
            v: vel.clone(),
        });
    }
    Ok((samples, drift))
}

/// Integrate `x'' + Gamma(x)(x', x') = 0` from `(p, v)` up to parameter
/// `t_end`, halving the step until the `alpha`-speed drift is within
/// [`SPEED_DRIFT_TOL`] per unit parameter.
pub fn integrate_alpha_geodesic(
    m: &MetricSpec,
    p: &AmbientPoint,
    v: &Vector,
    t_end: f64,
    step: f64,
) -> Result<GeodesicPath> {
    if v.len() != p.dim() {
        return Err(Error::Dimension {
            expected: p.dim(),
            got: v.len(),
        });
    }
    if v.iter().all(|&c| c == 0.0) {
        return Err(Error::ZeroVector);
    }
    if !(t_end > 0.0) || !(step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need t_end > 0 and step > 0, got {t_end} and {step}"
        )));
    }
    m.check_height(p.height())?;
    let tol = SPEED_DRIFT_TOL * t_end.max(1.0);
    let mut h = step;
    let mut exit_retries = 0;
    loop {
        match integrate_fixed(m, p, v, t_end, h) {
            Ok((samples, drift)) if drift <= tol => {
                return Ok(GeodesicPath {
                    samples,
                    metric: PathMetric::Alpha,
                    parameterization: Parameterization::Affine,
                    step: h,
                });
            }
            Ok(_) => {}
            // An exit may be an overshoot of a coarse step; refine a few times
            // before reporting it.
            Err(Error::DomainExit { time }) => {
                exit_retries += 1;
                if exit_retries > EXIT_RETRIES {
                    return Err(Error::DomainExit { time });
                }
            }
            Err(e) => return Err(e),
        }
        h *= 0.5;
        if h < MIN_STEP || t_end / h > MAX_STEPS {
            return Err(Error::StepUnderflow { step: h });
        }
    }
}

/// Riemannian part of `F` when it is one of the diagonal metrics, or `None`
/// for a constant (Minkowski) gauge.
fn alpha_of(nd: &NavigationData) -> Result<Option<MetricSpec>> {
    let dim = nd.dim();
    let wind = nd.wind();
    let vertical = (0..dim - 1).all(|i| wind[i] == 0.0);
    match nd.base() {
        MetricSpec::Euclidean => Ok(None),
        MetricSpec::Hyperbolic if vertical => Ok(Some(MetricSpec::DiagonalAlpha {
            cos_theta0: wind[dim - 1],
        })),
        _ => Err(Error::InvalidParameter(
            "F-geodesics are available for Euclidean seas and for hyperbolic seas with vertical wind"
                .into(),
        )),
    }
}

fn cubic_hermite(y0: f64, d0: f64, y1: f64, d1: f64, h: f64, s: f64) -> f64 {
    let t = s / h;
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * h * d0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * d1
}

/// `exp^F_p(t zeta)` for an `F`-unit `zeta`.
///
/// The `alpha`-geodesic from `p` along `zeta` is integrated at unit
/// `alpha`-speed; its `F`-length is accumulated by the trapezoidal rule and
/// inverted on the final step by Hermite interpolation.
pub fn exp_f(nd: &NavigationData, p: &AmbientPoint, zeta: &Vector, t: f64) -> Result<AmbientPoint> {
    Ok(exp_f_path(nd, p, zeta, t)?.end().x.clone()).and_then(AmbientPoint::new)
}

/// Like [`exp_f`], returning the unit-`F`-speed path sampled on the
/// `alpha`-integration grid (the last sample sits exactly at `F`-length `t`).
pub fn exp_f_path(nd: &NavigationData, p: &AmbientPoint, zeta: &Vector, t: f64) -> Result<GeodesicPath> {
    let gauge = nd.randers_eval(p, zeta)?.f;
    if (gauge - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!(
            "initial direction must be F-unit, F = {gauge}"
        )));
    }
    if t < 0.0 {
        return Err(Error::InvalidParameter(format!("negative distance {t}")));
    }
    let unit = |x: &Vector, v: &Vector| -> PathSample {
        PathSample {
            t: 0.0,
            x: x.clone(),
            v: v.clone(),
        }
    };
    let Some(alpha) = alpha_of(nd)? else {
        // Minkowski gauge: straight lines at unit F-speed.
        let end = p.coords() + zeta * t;
        return Ok(GeodesicPath {
            samples: vec![
                unit(p.coords(), zeta),
                PathSample {
                    t,
                    x: end,
                    v: zeta.clone(),
                },
            ],
            metric: PathMetric::Finsler,
            parameterization: Parameterization::UnitFinslerSpeed,
            step: t,
        });
    };
    if t == 0.0 {
        return Ok(GeodesicPath {
            samples: vec![unit(p.coords(), zeta)],
            metric: PathMetric::Finsler,
            parameterization: Parameterization::UnitFinslerSpeed,
            step: 0.0,
        });
    }
    let cos_theta0 = match alpha {
        MetricSpec::DiagonalAlpha { cos_theta0 } => cos_theta0,
        _ => unreachable!(),
    };
    let last = p.dim() - 1;
    // F along an alpha-unit tangent: 1 + beta(u), beta = c/(z^2 - c^2) dz.
    let finsler_speed = |x: &Vector, u: &Vector| -> f64 {
        let z = x[last];
        speed_sq(&alpha, x, u).sqrt() + cos_theta0 * u[last] / (z * z - cos_theta0 * cos_theta0)
    };
    let mut x = p.coords().clone();
    let mut u = zeta / speed_sq(&alpha, &x, zeta).sqrt();
    let h = EXP_F_STEP;
    let mut length = 0.0;
    let mut speed = finsler_speed(&x, &u);
    let mut samples = vec![PathSample {
        t: 0.0,
        x: x.clone(),
        v: &u / speed,
    }];
    let mut s = 0.0;
    loop {
        let (xn, un) = rk4_geodesic(&alpha, &x, &u, h);
        s += h;
        if alpha.check_height(xn[last]).is_err() || xn.iter().any(|c| !c.is_finite()) {
            return Err(Error::DomainExit { time: length });
        }
        let speed_n = finsler_speed(&xn, &un);
        let length_n = length + 0.5 * h * (speed + speed_n);
        if length_n >= t {
            // Solve L(s*) = t on this step with a Hermite model of L.
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if cubic_hermite(length, speed, length_n, speed_n, h, mid) < t {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let sigma = 0.5 * (lo + hi);
            let end = Vector::from_fn(x.len(), |i, _| cubic_hermite(x[i], u[i], xn[i], un[i], h, sigma));
            let tangent = Vector::from_fn(x.len(), |i, _| {
                let eps = 1e-7 * h;
                (cubic_hermite(x[i], u[i], xn[i], un[i], h, sigma + eps)
                    - cubic_hermite(x[i], u[i], xn[i], un[i], h, sigma - eps))
                    / (2.0 * eps)
            });
            let sp = finsler_speed(&end, &tangent);
            samples.push(PathSample {
                t,
                x: end,
                v: tangent / sp,
            });
            return Ok(GeodesicPath {
                samples,
                metric: PathMetric::Finsler,
                parameterization: Parameterization::UnitFinslerSpeed,
                step: h,
            });
        }
        x = xn;
        u = un;
        speed = speed_n;
        length = length_n;
        samples.push(PathSample {
            t: length,
            x: x.clone(),
            v: &u / speed,
        });
        if s > 1e6 {
            return Err(Error::NonConvergence {
                iterations: samples.len(),
                residual: t - length,
            });
        }
    }
}

/// Unit-speed `F`-geodesic state in the meridian plane `(r, z)`:
/// position and `alpha`-unit tangent. With `cos_theta0 = 0` this is the
/// unit-speed hyperbolic geodesic flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeridianGeodesic {
    pub r: f64,
    pub z: f64,
    pub ur: f64,
    pub uz: f64,
}

impl MeridianGeodesic {
    /// Start at `(r, z)` in direction `(vr, vz)` (any positive scaling).
    pub fn new(cos_theta0: f64, r: f64, z: f64, vr: f64, vz: f64) -> Self {
        let (a, b) = MetricSpec::DiagonalAlpha { cos_theta0 }.coefficients_unchecked(z);
        let norm = (a * vr * vr + b * vz * vz).sqrt();
        MeridianGeodesic {
            r,
            z,
            ur: vr / norm,
            uz: vz / norm,
        }
    }

    fn derivative(cos_theta0: f64, s: [f64; 4]) -> [f64; 4] {
        let [_, z, ur, uz] = s;
        let ell = z * z - cos_theta0 * cos_theta0;
        let a = 1.0 / ell;
        let b = z * z / (ell * ell);
        let da = -2.0 * z / (ell * ell);
        let db = 2.0 * z / (ell * ell) - 4.0 * z * z * z / (ell * ell * ell);
        let beta = cos_theta0 * uz / ell;
        // d/dt with t the F-length: ds/dt = 1 / F(u) = 1 / (1 + beta(u)).
        let rate = 1.0 / (1.0 + beta);
        let ar = -(da / a) * ur * uz;
        let az = 0.5 * (da / b) * ur * ur - 0.5 * (db / b) * uz * uz;
        [ur * rate, uz * rate, ar * rate, az * rate]
    }

    /// Euclidean velocity `dx/dt` at unit `F`-speed.
    pub fn velocity(&self, cos_theta0: f64) -> (f64, f64) {
        let d = Self::derivative(cos_theta0, [self.r, self.z, self.ur, self.uz]);
        (d[0], d[1])
    }

    /// Advance by `F`-length `dt` with `substeps` RK4 steps.
    pub fn advance(&mut self, cos_theta0: f64, dt: f64, substeps: usize) {
        let h = dt / substeps as f64;
        let mut s = [self.r, self.z, self.ur, self.uz];
        let add = |a: [f64; 4], b: [f64; 4], k: f64| [a[0] + k * b[0], a[1] + k * b[1], a[2] + k * b[2], a[3] + k * b[3]];
        for _ in 0..substeps {
            let k1 = Self::derivative(cos_theta0, s);
            let k2 = Self::derivative(cos_theta0, add(s, k1, 0.5 * h));
            let k3 = Self::derivative(cos_theta0, add(s, k2, 0.5 * h));
            let k4 = Self::derivative(cos_theta0, add(s, k3, h));
            for i in 0..4 {
                s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        [self.r, self.z, self.ur, self.uz] = s;
    }
}

/// Closed-form unit-speed geodesic of the Poincare half-space metric from
/// `p` in direction `v`, evaluated at hyperbolic arclength `s`.
///
/// Returns the point and its Euclidean velocity.
pub fn hyperbolic_geodesic(p: &AmbientPoint, v: &Vector, s: f64) -> Result<(Vector, Vector)> {
    let dim = p.dim();
    if v.len() != dim {
        return Err(Error::Dimension { expected: dim, got: v.len() });
    }
    if v.iter().all(|&c| c == 0.0) {
        return Err(Error::ZeroVector);
    }
    let z0 = p.height();
    if z0 <= 0.0 {
        return Err(Error::DomainViolation { height: z0, bound: 0.0 });
    }
    let last = dim - 1;
    let mut horizontal = v.clone();
    horizontal[last] = 0.0;
    let vx = horizontal.norm();
    let vz = v[last];
    let mut point = p.coords().clone();
    let mut velocity = Vector::zeros(dim);
    if vx <= 1e-14 * v.norm() {
        let sign = vz.signum();
        let z = z0 * (sign * s).exp();
        point[last] = z;
        velocity[last] = sign * z;
        return Ok((point, velocity));
    }
    let e = horizontal / vx;
    // Semicircle centered at horizontal offset `c` on the boundary plane.
    let c = z0 * vz / vx;
    let radius = (c * c + z0 * z0).sqrt();
    let sigma = (-c / radius).atanh() + s;
    let offset = c + radius * sigma.tanh();
    let z = radius / sigma.cosh();
    let sech = 1.0 / sigma.cosh();
    point += &e * offset;
    point[last] = z;
    velocity += &e * (radius * sech * sech);
    velocity[last] = -radius * sech * sigma.tanh();
    Ok((point, velocity))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CurvatureReport {
    pub point: Vec<f64>,
    pub plane: (usize, usize),
    pub k_closed_form: f64,
    pub k_finite_difference: f64,
    /// The fully simplified mixed-plane expression as printed alongside the
    /// Christoffel computation; it does not agree with the expression it is
    /// derived from and is reported for comparison only.
    pub k_printed_simplification: Option<f64>,
}

/// Sectional curvature of the coordinate plane `(i, j)` (0-based indices).
pub fn sectional_curvature(m: &MetricSpec, x: &AmbientPoint, plane: (usize, usize)) -> Result<CurvatureReport> {
    let (i, j) = plane;
    let dim = x.dim();
    if i == j || i >= dim || j >= dim {
        return Err(Error::DegeneratePlane(i, j));
    }
    let z = x.height();
    let (a, b) = m.coefficients(z)?;
    let (da, db) = m.coefficient_derivatives_unchecked(z);
    let last = dim - 1;
    let (k_closed, printed) = if i != last && j != last {
        // R^i_{ijj} = Gamma^i_{iz} Gamma^z_{jj}, normalized by g_jj.
        let r = -0.25 * da * da / (a * b);
        (r / a, None)
    } else {
        // R^z_{zjj} = -(1/2) d(A'/B) - (1/4) B' A' / B^2 + (1/4) A'^2 / (A B).
        let dda = second_derivative_a(m, z);
        let d_ratio = dda / b - da * db / (b * b);
        let r = -0.5 * d_ratio - 0.25 * db * da / (b * b) + 0.25 * da * da / (a * b);
        let printed = match *m {
            MetricSpec::DiagonalAlpha { cos_theta0 } => {
                let c2 = cos_theta0 * cos_theta0;
                let ell = z * z - c2;
                let line = -1.0 / (z * z)
                    - c2 * z * z / ell.powi(3)
                    - c2 / ell * (1.0 + z * z / ell);
                Some(line / a)
            }
            _ => None,
        };
        (r / a, printed)
    };
    let k_fd = finite_difference_curvature(|y| m.matrix(y), x, plane, CURVATURE_FD_STEP)?;
    Ok(CurvatureReport {
        point: x.coords().iter().copied().collect(),
        plane,
        k_closed_form: k_closed,
        k_finite_difference: k_fd,
        k_printed_simplification: printed,
    })
}

fn second_derivative_a(m: &MetricSpec, z: f64) -> f64 {
    match *m {
        MetricSpec::Euclidean => 0.0,
        MetricSpec::Hyperbolic => 6.0 / z.powi(4),
        MetricSpec::DiagonalAlpha { cos_theta0 } => {
            let ell = z * z - cos_theta0 * cos_theta0;
            -2.0 / (ell * ell) + 8.0 * z * z / ell.powi(3)
        }
    }
}

/// Sectional curvature from central differences of the metric tensor alone.
pub fn finite_difference_curvature<G>(metric: G, x: &AmbientPoint, plane: (usize, usize), h: f64) -> Result<f64>
where
    G: Fn(&AmbientPoint) -> Result<Matrix>,
{
    let dim = x.dim();
    let (a_idx, b_idx) = plane;
    if a_idx == b_idx || a_idx >= dim || b_idx >= dim {
        return Err(Error::DegeneratePlane(a_idx, b_idx));
    }
    let shifted = |base: &AmbientPoint, k: usize, s: f64| -> Result<AmbientPoint> {
        let mut c = base.coords().clone();
        c[k] += s;
        AmbientPoint::new(c)
    };
    let gamma_at = |y: &AmbientPoint| -> Result<Vec<f64>> {
        let g = metric(y)?;
        let g_inv = g.clone().try_inverse().ok_or(Error::DegeneratePlane(a_idx, b_idx))?;
        let mut dg = Vec::with_capacity(dim);
        for m in 0..dim {
            let plus = metric(&shifted(y, m, h)?)?;
            let minus = metric(&shifted(y, m, -h)?)?;
            dg.push((plus - minus) / (2.0 * h));
        }
        let mut gamma = vec![0.0; dim * dim * dim];
        for k in 0..dim {
            for i in 0..dim {
                for j in 0..dim {
                    let mut acc = 0.0;
                    for l in 0..dim {
                        acc += g_inv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                    }
                    gamma[(k * dim + i) * dim + j] = 0.5 * acc;
                }
            }
        }
        Ok(gamma)
    };
    let idx = |k: usize, i: usize, j: usize| (k * dim + i) * dim + j;
    let gamma = gamma_at(x)?;
    let mut dgamma = Vec::with_capacity(dim);
    for m in 0..dim {
        let plus = gamma_at(&shifted(x, m, h)?)?;
        let minus = gamma_at(&shifted(x, m, -h)?)?;
        dgamma.push(plus.iter().zip(&minus).map(|(p, q)| (p - q) / (2.0 * h)).collect::<Vec<_>>());
    }
    // R^l_{ijk} = d_j G^l_{ik} - d_k G^l_{ij} + G^l_{jm} G^m_{ik} - G^l_{km} G^m_{ij},
    // evaluated with (i, j, k) = (b, a, b) for g(R(e_a, e_b) e_b, e_a).
    let (i, j, k) = (b_idx, a_idx, b_idx);
    let g = metric(x)?;
    let mut numerator = 0.0;
    for l in 0..dim {
        let mut r = dgamma[j][idx(l, i, k)] - dgamma[k][idx(l, i, j)];
        for m in 0..dim {
            r += gamma[idx(l, j, m)] * gamma[idx(m, i, k)] - gamma[idx(l, k, m)] * gamma[idx(m, i, j)];
        }
        numerator += g[(l, a_idx)] * r;
    }
    let denom = g[(a_idx, a_idx)] * g[(b_idx, b_idx)] - g[(a_idx, b_idx)].powi(2);
    Ok(numerator / denom)
}

/// Second fundamental form data of `S^n_+` inside `(R^{n+1}_+, alpha)` at polar
/// angle `phi`, in the meridian parameterization `(sin phi cos b, sin phi sin b, cos phi)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SphereConvexity {
    /// Horizontal coefficient of the inner normal `V = (-C cos b, -C sin b, -1)`.
    pub c: f64,
    pub ii_phiphi: f64,
    pub ii_betabeta: f64,
}

pub fn sphere_convexity(theta0: f64, phi: f64) -> Result<SphereConvexity> {
    let cos0 = theta0.cos().abs();
    let cphi = phi.cos();
    let sphi = phi.sin();
    let ell = cphi * cphi - cos0 * cos0;
    if !(phi > 0.0 && phi < std::f64::consts::FRAC_PI_2) || ell <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "phi = {phi} outside the admissible range (0, {})",
            cos0.acos()
        )));
    }
    let c = sphi * cphi / ell;
    let a = 1.0 / ell;
    let b = cphi * cphi / (ell * ell);
    Ok(SphereConvexity {
        c,
        ii_phiphi: a * c * sphi + b * cphi,
        ii_betabeta: a * c * sphi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4};

    fn pt(c: &[f64]) -> AmbientPoint {
        AmbientPoint::from_slice(c).unwrap()
    }

    #[test]
    fn christoffel_hyperbolic_limit() {
        let m = MetricSpec::alpha(FRAC_PI_2);
        let g = christoffel(&m, &pt(&[0.1, 0.2, 1.7])).unwrap();
        assert_relative_eq!(g.get(0, 0, 2), -1.0 / 1.7, max_relative = 1e-12);
        let h = christoffel(&MetricSpec::Hyperbolic, &pt(&[0.1, 0.2, 1.7])).unwrap();
        for (k, i, j) in h.nonzero() {
            assert_relative_eq!(g.get(k, i, j), h.get(k, i, j), max_relative = 1e-12);
        }
    }

    #[test]
    fn christoffel_alpha_at_unit_height() {
        let g = christoffel(&MetricSpec::alpha(FRAC_PI_3), &pt(&[0.0, 0.0, 1.0])).unwrap();
        assert_relative_eq!(g.get(1, 1, 2), -4.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(g.get(0, 2, 0), -4.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn christoffel_only_three_families_and_symmetric() {
        let g = christoffel(&MetricSpec::alpha(1.0), &pt(&[0.3, -0.1, 0.4, 1.2])).unwrap();
        let last = 3;
        for (k, i, j) in g.nonzero() {
            let family = (k == last && i == j)
                || (k < last && ((i == k && j == last) || (j == k && i == last)));
            assert!(family, "unexpected entry ({k},{i},{j})");
        }
        for k in 0..4 {
            for i in 0..4 {
                for j in 0..4 {
                    assert_eq!(g.get(k, i, j), g.get(k, j, i));
                }
            }
        }
    }

    #[test]
    fn vertical_hyperbolic_ray() {
        let p = pt(&[0.0, 0.0, 1.0]);
        let v = Vector::from_column_slice(&[0.0, 0.0, 1.0]);
        let path = integrate_alpha_geodesic(&MetricSpec::Hyperbolic, &p, &v, 1.0, DEFAULT_STEP).unwrap();
        for s in path.samples.iter().step_by(100) {
            assert_relative_eq!(s.x[2], s.t.exp(), max_relative = 1e-10);
        }
    }

    #[test]
    fn euclidean_geodesics_are_lines() {
        let p = pt(&[0.5, -1.0, 2.0]);
        let v = Vector::from_column_slice(&[0.3, 0.4, -0.5]);
        let path = integrate_alpha_geodesic(&MetricSpec::Euclidean, &p, &v, 2.0, 0.1).unwrap();
        let end = &path.end().x;
        assert!((end - (p.coords() + &v * 2.0)).norm() < 1e-14);
    }

    #[test]
    fn vertical_alpha_ray_approaches_the_boundary_without_reaching_it() {
        // Along the vertical, d(s_alpha) = z dz / (z^2 - c^2), so z^2 - c^2 = (1 - c^2) e^{-2s}.
        let c = 0.5f64;
        let p = pt(&[0.0, 1.0]);
        let v = Vector::from_column_slice(&[0.0, -(1.0 - c * c)]);
        let path = integrate_alpha_geodesic(&MetricSpec::DiagonalAlpha { cos_theta0: c }, &p, &v, 5.0, 1e-3).unwrap();
        for s in path.samples.iter().step_by(500) {
            let z = s.x[1];
            let expected = (1.0 - c * c) * (-2.0 * s.t).exp();
            assert!(((z * z - c * c) / expected - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn domain_exit_is_reported() {
        let p = pt(&[0.0, 1.0]);
        let v = Vector::from_column_slice(&[0.0, -1.0]);
        // The exact ray never reaches the boundary, but after long enough
        // z^2 - c^2 drops below the numerical domain margin.
        let err = integrate_alpha_geodesic(&MetricSpec::alpha(FRAC_PI_3), &p, &v, 30.0, DEFAULT_STEP).unwrap_err();
        assert!(matches!(err, Error::DomainExit { .. }), "{err:?}");
    }

    #[test]
    fn exp_f_at_zero_is_identity() {
        let nd = NavigationData::ball(FRAC_PI_3, 2).unwrap();
        let p = pt(&[0.1, 0.0, 1.0]);
        let zeta = nd.finsler_normal(&p, &Vector::from_column_slice(&[0.0, 0.0, 1.0])).unwrap();
        assert_eq!(exp_f(&nd, &p, &zeta, 0.0).unwrap(), p);
    }

    #[test]
    fn exact_geodesic_is_unit_speed_semicircle() {
        let p = pt(&[0.2, -0.3, 0.8]);
        let v = Vector::from_column_slice(&[0.5, 0.1, 0.3]);
        let (x0, v0) = hyperbolic_geodesic(&p, &v, 0.0).unwrap();
        assert!((x0 - p.coords()).norm() < 1e-14);
        assert_relative_eq!(v0.normalize().dot(&v.normalize()), 1.0, max_relative = 1e-12);
        for s in [0.3, 1.0, -0.7] {
            let (x, vel) = hyperbolic_geodesic(&p, &v, s).unwrap();
            assert_relative_eq!(vel.norm() / x[2], 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn horizontal_planes_have_curvature_minus_one() {
        for theta0 in [0.4, FRAC_PI_3, FRAC_PI_2, 2.2] {
            let m = MetricSpec::alpha(theta0);
            let x = pt(&[0.1, 0.2, 0.3, 1.4]);
            let r = sectional_curvature(&m, &x, (0, 1)).unwrap();
            assert_relative_eq!(r.k_closed_form, -1.0, max_relative = 1e-12);
            assert!((r.k_finite_difference + 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn mixed_plane_closed_form_matches_oracle() {
        let m = MetricSpec::alpha(FRAC_PI_3);
        let r = sectional_curvature(&m, &pt(&[0.0, 0.0, 1.0]), (0, 2)).unwrap();
        assert!(r.k_closed_form < 0.0 && r.k_finite_difference < 0.0);
        assert!((r.k_closed_form - r.k_finite_difference).abs() < 1e-5);
        let hyp = sectional_curvature(&MetricSpec::alpha(FRAC_PI_2), &pt(&[0.0, 0.0, 1.3]), (0, 2)).unwrap();
        assert_relative_eq!(hyp.k_closed_form, -1.0, max_relative = 1e-10);
    }

    #[test]
    fn degenerate_plane_rejected() {
        let m = MetricSpec::Hyperbolic;
        assert!(matches!(
            sectional_curvature(&m, &pt(&[0.0, 0.0, 1.0]), (1, 1)),
            Err(Error::DegeneratePlane(1, 1))
        ));
        assert!(sectional_curvature(&m, &pt(&[0.0, 0.0, 1.0]), (0, 3)).is_err());
    }

    #[test]
    fn sphere_convexity_values() {
        let s = sphere_convexity(FRAC_PI_2, FRAC_PI_4).unwrap();
        assert!((s.c - 1.0).abs() < 4.0 * f64::EPSILON);
        let s = sphere_convexity(FRAC_PI_3, FRAC_PI_4).unwrap();
        assert!((s.c - 2.0).abs() < 1e-14, "{}", s.c - 2.0);
        assert!(s.ii_phiphi > 0.0 && s.ii_betabeta > 0.0);
        assert!(sphere_convexity(FRAC_PI_3, 1.1).is_err());
        assert!(sphere_convexity(2.0 * FRAC_PI_3, 1.1).is_err());
    }

    #[test]
    fn sphere_normal_is_alpha_orthogonal_to_meridian() {
        for (theta0, phi) in [(FRAC_PI_3, 0.4), (2.0, 0.9), (FRAC_PI_2, 1.2)] {
            let s = sphere_convexity(theta0, phi).unwrap();
            let m = MetricSpec::alpha(theta0);
            let beta = 0.7f64;
            let x = pt(&[phi.sin() * beta.cos(), phi.sin() * beta.sin(), phi.cos()]);
            let r_phi = Vector::from_column_slice(&[phi.cos() * beta.cos(), phi.cos() * beta.sin(), -phi.sin()]);
            let r_beta = Vector::from_column_slice(&[-phi.sin() * beta.sin(), phi.sin() * beta.cos(), 0.0]);
            let normal = Vector::from_column_slice(&[-s.c * beta.cos(), -s.c * beta.sin(), -1.0]);
            assert!(m.eval(&x, &r_phi, &normal).unwrap().abs() < 1e-12);
            assert!(m.eval(&x, &r_beta, &normal).unwrap().abs() < 1e-12);
        }
    }
}
