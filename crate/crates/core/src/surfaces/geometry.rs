use serde::Serialize;

use super::spline::{polynomial_end_slope, CubicSpline, EndCondition, P2};
use super::SurfaceMode;

/// Mirror nodes added beyond an axis end before fitting the spline.
const AXIS_PAD: usize = 6;
/// Nodes used for the polynomial end slope at a non-axis end.
const END_FIT: usize = 9;
/// Fewest nodes a profile run needs for spline geometry.
pub(crate) const MIN_PROFILE_RUN: usize = END_FIT + 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ChainEnd {
    /// Node on the rotation axis (`r = 0`); the profile is extended by reflection.
    Axis,
    Open,
}

/// A polyline whose geometry is computed as one piece.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Chain<'a> {
    pub points: &'a [P2],
    pub mode: SurfaceMode,
    pub n: usize,
    pub closed: bool,
    pub start: ChainEnd,
    pub end: ChainEnd,
    /// `+1` when the outward normal is the clockwise rotation of the forward tangent.
    pub side: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContactAngle {
    pub node: usize,
    pub theta: f64,
}

/// Per-node extrinsic geometry. Normals are outward from the enclosed region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceGeometry {
    pub tangent: Vec<P2>,
    pub normal: Vec<P2>,
    /// Signed curvature of the curve / profile.
    pub profile_curvature: Vec<f64>,
    /// Sum of principal curvatures.
    pub mean_curvature: Vec<f64>,
    /// Squared norm of the second fundamental form.
    pub second_form_sq: Vec<f64>,
    pub area_element: Vec<f64>,
    pub height: Vec<f64>,
    pub contact_angles: Vec<ContactAngle>,
}

impl SurfaceGeometry {
    pub fn len(&self) -> usize {
        self.normal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normal.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.area_element.iter().sum()
    }

    pub fn min_mean_curvature(&self) -> f64 {
        self.mean_curvature.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `|S^k|`, the measure of the unit `k`-sphere.
pub fn sphere_measure(k: usize) -> f64 {
    use std::f64::consts::PI;
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (k as f64 - 1.0) * sphere_measure(k - 2),
    }
}

fn right(t: P2) -> P2 {
    [t[1], -t[0]]
}

pub(crate) fn chain_geometry(chain: &Chain<'_>) -> SurfaceGeometry {
    match chain.mode {
        SurfaceMode::Curve2d => curve_geometry(chain),
        SurfaceMode::Axisymmetric => profile_geometry(chain),
    }
}

/// Circle through three points: its tangent at `at` (oriented along `a -> c`)
/// and the signed curvature (positive when turning left).
fn circle_data(a: P2, b: P2, c: P2, at: P2) -> (P2, f64) {
    let e1 = [b[0] - a[0], b[1] - a[1]];
    let e2 = [c[0] - b[0], c[1] - b[1]];
    let e3 = [c[0] - a[0], c[1] - a[1]];
    let cross = e1[0] * e2[1] - e1[1] * e2[0];
    let l1 = e1[0].hypot(e1[1]);
    let l2 = e2[0].hypot(e2[1]);
    let l3 = e3[0].hypot(e3[1]);
    let kappa = 2.0 * cross / (l1 * l2 * l3);
    if cross.abs() <= 1e-14 * l1 * l2 {
        return ([e3[0] / l3, e3[1] / l3], kappa);
    }
    let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
    let sa = a[0] * a[0] + a[1] * a[1];
    let sb = b[0] * b[0] + b[1] * b[1];
    let sc = c[0] * c[0] + c[1] * c[1];
    let ux = (sa * (b[1] - c[1]) + sb * (c[1] - a[1]) + sc * (a[1] - b[1])) / d;
    let uy = (sa * (c[0] - b[0]) + sb * (a[0] - c[0]) + sc * (b[0] - a[0])) / d;
    let radial = [at[0] - ux, at[1] - uy];
    let len = radial[0].hypot(radial[1]);
    let mut t = [-radial[1] / len, radial[0] / len];
    if t[0] * e3[0] + t[1] * e3[1] < 0.0 {
        t = [-t[0], -t[1]];
    }
    (t, kappa)
}

fn curve_geometry(chain: &Chain<'_>) -> SurfaceGeometry {
    let p = chain.points;
    let n = p.len();
    let mut tangent = Vec::with_capacity(n);
    let mut kappa = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b, c) = if chain.closed {
            (p[(i + n - 1) % n], p[i], p[(i + 1) % n])
        } else if i == 0 {
            (p[0], p[1], p[2])
        } else if i == n - 1 {
            (p[n - 3], p[n - 2], p[n - 1])
        } else {
            (p[i - 1], p[i], p[i + 1])
        };
        let (t, k) = circle_data(a, b, c, p[i]);
        tangent.push(t);
        kappa.push(chain.side * k);
    }
    let normal: Vec<P2> = tangent
        .iter()
        .map(|&t| {
            let r = right(t);
            [chain.side * r[0], chain.side * r[1]]
        })
        .collect();
    let mut area = vec![0.0; n];
    let segments = if chain.closed { n } else { n - 1 };
    for k in 0..segments {
        let (a, b) = (p[k], p[(k + 1) % n]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        area[k] += 0.5 * len;
        area[(k + 1) % n] += 0.5 * len;
    }
    SurfaceGeometry {
        second_form_sq: kappa.iter().map(|k| k * k).collect(),
        mean_curvature: kappa.clone(),
        profile_curvature: kappa,
        tangent,
        normal,
        area_element: area,
        height: p.iter().map(|q| q[1]).collect(),
        contact_angles: Vec::new(),
    }
}

fn mirrored(q: P2) -> P2 {
    [-q[0], q[1]]
}

fn profile_geometry(chain: &Chain<'_>) -> SurfaceGeometry {
    let p = chain.points;
    let count = p.len();
    let mut padded: Vec<P2> = Vec::with_capacity(count + 2 * AXIS_PAD);
    let offset = if chain.start == ChainEnd::Axis {
        let pad = AXIS_PAD.min(count - 1);
        padded.extend(p[1..=pad].iter().rev().map(|&q| mirrored(q)));
        pad
    } else {
        0
    };
    padded.extend_from_slice(p);
    if chain.end == ChainEnd::Axis {
        let pad = AXIS_PAD.min(count - 1);
        padded.extend(p[count - 1 - pad..count - 1].iter().rev().map(|&q| mirrored(q)));
    }
    let mut knots = Vec::with_capacity(padded.len());
    knots.push(0.0);
    for w in padded.windows(2) {
        let last = *knots.last().unwrap();
        knots.push(last + (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]));
    }
    let m = padded.len();
    let fit = END_FIT.min(m);
    let start = match chain.start {
        ChainEnd::Axis => EndCondition::NotAKnot,
        ChainEnd::Open => {
            let ks: Vec<f64> = knots[..fit].iter().rev().copied().collect();
            let vs: Vec<P2> = padded[..fit].iter().rev().copied().collect();
            EndCondition::Clamped(polynomial_end_slope(&ks, &vs))
        }
    };
    let end = match chain.end {
        ChainEnd::Axis => EndCondition::NotAKnot,
        ChainEnd::Open => EndCondition::Clamped(polynomial_end_slope(&knots[m - fit..], &padded[m - fit..])),
    };
    let spline = CubicSpline::new(knots.clone(), padded, start, end);

    let n = chain.n;
    let measure = sphere_measure(n - 1);
    let mut geom = SurfaceGeometry {
        tangent: Vec::with_capacity(count),
        normal: Vec::with_capacity(count),
        profile_curvature: Vec::with_capacity(count),
        mean_curvature: Vec::with_capacity(count),
        second_form_sq: Vec::with_capacity(count),
        area_element: Vec::with_capacity(count),
        height: p.iter().map(|q| q[1]).collect(),
        contact_angles: Vec::new(),
    };
    for i in 0..count {
        let (d1, d2) = spline.derivatives_at_knot(i + offset);
        let speed = d1[0].hypot(d1[1]);
        let t = [d1[0] / speed, d1[1] / speed];
        let r = right(t);
        let nu = [chain.side * r[0], chain.side * r[1]];
        let kappa = chain.side * (d1[0] * d2[1] - d1[1] * d2[0]) / speed.powi(3);
        let radius = p[i][0];
        let on_axis = (i == 0 && chain.start == ChainEnd::Axis) || (i == count - 1 && chain.end == ChainEnd::Axis);
        let (h, h_sq) = if on_axis || radius == 0.0 {
            (n as f64 * kappa, n as f64 * kappa * kappa)
        } else {
            let rot = nu[0] / radius;
            (kappa + (n as f64 - 1.0) * rot, kappa * kappa + (n as f64 - 1.0) * rot * rot)
        };
        let left = if i > 0 { knots[i + offset] - knots[i + offset - 1] } else { 0.0 };
        let right_len = if i + 1 < count { knots[i + offset + 1] - knots[i + offset] } else { 0.0 };
        let weight = 0.5 * (left + right_len);
        geom.tangent.push(t);
        geom.normal.push(nu);
        geom.profile_curvature.push(kappa);
        geom.mean_curvature.push(h);
        geom.second_form_sq.push(h_sq);
        geom.area_element.push(measure * radius.abs().powi(n as i32 - 1) * speed * weight);
    }
    geom
}

/// Derivative of nodal values with respect to arclength along a polyline,
/// by three-point differences on the chord parameter.
pub(crate) fn arclength_derivative(points: &[P2], closed: bool, f: &[f64]) -> Vec<f64> {
    let n = points.len();
    let dist = |i: usize, j: usize| (points[j][0] - points[i][0]).hypot(points[j][1] - points[i][1]);
    let three = |fm: f64, f0: f64, fp: f64, h1: f64, h2: f64| {
        -h2 / (h1 * (h1 + h2)) * fm + (h2 - h1) / (h1 * h2) * f0 + h1 / (h2 * (h1 + h2)) * fp
    };
    (0..n)
        .map(|i| {
            if closed {
                let (im, ip) = ((i + n - 1) % n, (i + 1) % n);
                three(f[im], f[i], f[ip], dist(im, i), dist(i, ip))
            } else if i == 0 {
                let (h1, h2) = (dist(0, 1), dist(1, 2));
                // One-sided: derivative at the first of three points.
                -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * f[0] + (h1 + h2) / (h1 * h2) * f[1] - h1 / (h2 * (h1 + h2)) * f[2]
            } else if i == n - 1 {
                let (h1, h2) = (dist(n - 3, n - 2), dist(n - 2, n - 1));
                h2 / (h1 * (h1 + h2)) * f[n - 3] - (h1 + h2) / (h1 * h2) * f[n - 2]
                    + (2.0 * h2 + h1) / (h2 * (h1 + h2)) * f[n - 1]
            } else {
                three(f[i - 1], f[i], f[i + 1], dist(i - 1, i), dist(i, i + 1))
            }
        })
        .collect()
}
