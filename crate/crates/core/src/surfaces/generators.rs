use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DiscreteHypersurface, Support, SurfaceMode, P2};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CapKind {
    /// Spherical cap meeting the unit sphere orthogonally.
    BallFreeBoundary,
    /// Spherical cap meeting the unit sphere at constant angle `theta0`.
    BallCapillary,
    /// Spherical cap meeting `{x_{n+1} = 0}` at constant angle `theta0`.
    HalfspaceCapillary,
}

/// Spherical cap of the given kind with `segments` segments.
///
/// `radius` is the radius of the sphere carrying the cap. Half-space caps are
/// centered at height `-R cos theta0`; ball caps at height
/// `d = sqrt(1 + R^2 + 2 R cos theta0)` on the axis. In ball modes the region
/// `Omega` lies between the cap and the top of the unit sphere.
pub fn cap(
    kind: CapKind,
    mode: SurfaceMode,
    n: usize,
    theta0: f64,
    radius: f64,
    segments: usize,
) -> Result<DiscreteHypersurface> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!("cap radius must be positive, got {radius}")));
    }
    if !(theta0 > 0.0 && theta0 < PI) {
        return Err(Error::InvalidParameter(format!("theta0 = {theta0} outside (0, pi)")));
    }
    let theta0 = if kind == CapKind::BallFreeBoundary { FRAC_PI_2 } else { theta0 };
    let c = if kind == CapKind::BallFreeBoundary { 0.0 } else { theta0.cos() };
    let (support, point, extent): (Support, Box<dyn Fn(f64) -> P2>, f64) = match kind {
        CapKind::HalfspaceCapillary => (
            Support::HalfSpace,
            Box::new(move |phi: f64| [radius * phi.sin(), radius * (phi.cos() - c)]),
            theta0,
        ),
        CapKind::BallCapillary | CapKind::BallFreeBoundary => {
            let d = (1.0 + radius * radius + 2.0 * radius * c).sqrt();
            let cos_end = (radius + c) / d;
            if !(cos_end.abs() < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "no cap of radius {radius} meets the unit sphere at angle {theta0}"
                )));
            }
            (
                Support::Ball,
                Box::new(move |psi: f64| [radius * psi.sin(), d - radius * psi.cos()]),
                cos_end.acos(),
            )
        }
    };
    let mut nodes: Vec<P2> = match mode {
        SurfaceMode::Axisymmetric => (0..=segments)
            .map(|k| point(extent * k as f64 / segments as f64))
            .collect(),
        SurfaceMode::Curve2d => (0..=segments)
            .map(|k| point(extent * (2.0 * k as f64 / segments as f64 - 1.0)))
            .collect(),
    };
    // Land boundary nodes exactly on the support.
    let last = nodes.len() - 1;
    let ends: &[usize] = if mode == SurfaceMode::Curve2d { &[0, last] } else { &[last] };
    for &i in ends {
        match support {
            Support::HalfSpace => nodes[i][1] = 0.0,
            _ => {
                let norm = nodes[i][0].hypot(nodes[i][1]);
                nodes[i] = [nodes[i][0] / norm, nodes[i][1] / norm];
            }
        }
    }
    let n = if mode == SurfaceMode::Curve2d { 1 } else { n };
    DiscreteHypersurface::new(mode, support, n, theta0, nodes)
}

/// Round sphere (closed) of the given radius centered on the axis at `center`.
pub fn closed_sphere(mode: SurfaceMode, n: usize, center: f64, radius: f64, segments: usize) -> Result<DiscreteHypersurface> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!("sphere radius must be positive, got {radius}")));
    }
    let nodes: Vec<P2> = match mode {
        SurfaceMode::Curve2d => (0..segments)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / segments as f64;
                [radius * t.sin(), center + radius * t.cos()]
            })
            .collect(),
        SurfaceMode::Axisymmetric => (0..=segments)
            .map(|k| {
                let phi = PI * k as f64 / segments as f64;
                [radius * phi.sin(), center + radius * phi.cos()]
            })
            .collect(),
    };
    let n = if mode == SurfaceMode::Curve2d { 1 } else { n };
    DiscreteHypersurface::new(mode, Support::Closed, n, FRAC_PI_2, nodes)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    /// Largest normal displacement.
    pub amplitude: f64,
    /// Highest Fourier mode.
    pub frequency: usize,
    pub seed: u64,
}

/// Displace nodes along the outward normal by a seeded random Fourier series.
///
/// On open surfaces the series is multiplied by `(1 - u^2)^3`, with `u` the
/// normalized arclength from the axis (profiles) or from the midpoint
/// (curves), so boundary nodes and their tangents stay fixed and the contact
/// angle is unchanged. Profiles use even modes only, keeping the axis smooth.
pub fn perturb(s: &DiscreteHypersurface, p: Perturbation) -> Result<DiscreteHypersurface> {
    if !p.amplitude.is_finite() {
        return Err(Error::InvalidParameter("perturbation amplitude must be finite".into()));
    }
    if p.amplitude == 0.0 {
        return Ok(s.clone());
    }
    let geom = s.geometry()?;
    let nodes = s.nodes();
    let count = nodes.len();
    let closed_curve = s.is_closed_curve();
    let mut arc = vec![0.0; count];
    for i in 1..count {
        arc[i] = arc[i - 1] + (nodes[i][0] - nodes[i - 1][0]).hypot(nodes[i][1] - nodes[i - 1][1]);
    }
    let total = if closed_curve {
        arc[count - 1] + (nodes[0][0] - nodes[count - 1][0]).hypot(nodes[0][1] - nodes[count - 1][1])
    } else {
        arc[count - 1]
    };
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let cos_coef: Vec<f64> = (0..=p.frequency)
        .map(|k| rng.gen_range(-1.0..1.0) / ((1 + k) * (1 + k)) as f64)
        .collect();
    let sin_coef: Vec<f64> = (0..=p.frequency)
        .map(|k| rng.gen_range(-1.0..1.0) / ((1 + k) * (1 + k)) as f64)
        .collect();
    let series = |t: f64, period: f64, even: bool| -> f64 {
        (0..=p.frequency)
            .map(|k| {
                let w = 2.0 * PI * k as f64 / period;
                let even_part = cos_coef[k] * (w * t).cos();
                if even {
                    even_part
                } else {
                    even_part + sin_coef[k] * (w * t).sin()
                }
            })
            .sum()
    };
    let shape: Vec<f64> = (0..count)
        .map(|i| {
            let frac = arc[i] / total;
            match (s.mode(), s.support()) {
                (SurfaceMode::Curve2d, Support::Closed) => series(frac, 1.0, false),
                (SurfaceMode::Axisymmetric, Support::Closed) => series(frac, 2.0, true),
                (SurfaceMode::Axisymmetric, _) => series(frac, 2.0, true) * (1.0 - frac * frac).powi(3),
                (SurfaceMode::Curve2d, _) => {
                    let u = 2.0 * frac - 1.0;
                    series(u, 4.0, false) * (1.0 - u * u).powi(3)
                }
            }
        })
        .collect();
    let peak = shape.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Ok(s.clone());
    }
    let axis_nodes: Vec<usize> = match (s.mode(), s.support()) {
        (SurfaceMode::Axisymmetric, Support::Closed) => vec![0, count - 1],
        (SurfaceMode::Axisymmetric, _) => vec![0],
        _ => Vec::new(),
    };
    let boundary = s.boundary_nodes();
    let moved: Vec<P2> = (0..count)
        .map(|i| {
            if boundary.contains(&i) {
                return nodes[i];
            }
            let delta = p.amplitude * shape[i] / peak;
            let nu = geom.normal[i];
            let mut q = [nodes[i][0] + delta * nu[0], nodes[i][1] + delta * nu[1]];
            if axis_nodes.contains(&i) {
                q[0] = 0.0;
            }
            q
        })
        .collect();
    let out = s.with_nodes(moved)?;
    out.validated_geometry()?;
    Ok(out)
}
