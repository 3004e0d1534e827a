//! Discrete hypersurfaces with boundary on the unit sphere or on the plane
//! `{x_{n+1} = 0}`: curves in the plane (`n = 1`) and profiles of rotation
//! hypersurfaces in the `(r, z)` half-plane.

mod generators;
mod geometry;
mod io;
pub(crate) mod planar;
pub(crate) mod spline;

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Hypothesis, Result};

pub use generators::{cap, closed_sphere, perturb, CapKind, Perturbation};
pub use geometry::{sphere_measure, ContactAngle, SurfaceGeometry};
pub(crate) use geometry::{arclength_derivative, chain_geometry, Chain, ChainEnd, MIN_PROFILE_RUN};
pub use io::{read_surface, write_surface};
pub(crate) use io::write_nodes;
pub use spline::P2;

/// Boundary nodes must lie on the support within this distance.
pub const SUPPORT_TOL: f64 = 1e-10;
/// Slack allowed when comparing contact angles with `theta0`.
pub const ANGLE_TOL: f64 = 1e-6;
pub const MIN_NODES: usize = 16;
const AXIS_TOL: f64 = 1e-12;
const ARC_SAMPLES: usize = 256;
const SUPPORT_QUADRATURE: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceMode {
    /// Planar curve, `n = 1`, nodes are `(x, z)`.
    Curve2d,
    /// Profile `(r, z)` of a hypersurface of rotation about the `z`-axis.
    Axisymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Support {
    /// Boundary on the unit sphere.
    Ball,
    /// Boundary on `{x_{n+1} = 0}`.
    HalfSpace,
    /// No boundary.
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weight {
    One,
    Height,
}

/// An embedded discrete hypersurface together with the side of the region
/// `Omega` it bounds with the support.
///
/// Open curves end on the support at both endpoints; open profiles start on
/// the axis and end on the support; closed profiles start and end on the axis.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteHypersurface {
    mode: SurfaceMode,
    support: Support,
    n: usize,
    theta0: f64,
    nodes: Vec<P2>,
    side: f64,
}

impl DiscreteHypersurface {
    pub fn new(mode: SurfaceMode, support: Support, n: usize, theta0: f64, mut nodes: Vec<P2>) -> Result<Self> {
        match mode {
            SurfaceMode::Curve2d if n != 1 => {
                return Err(Error::InvalidParameter(format!("planar curves have n = 1, got {n}")))
            }
            _ if n == 0 => return Err(Error::InvalidParameter("n must be positive".into())),
            _ => {}
        }
        if !(theta0 > 0.0 && theta0 < std::f64::consts::PI) {
            return Err(Error::InvalidParameter(format!("theta0 = {theta0} outside (0, pi)")));
        }
        if nodes.len() < MIN_NODES {
            return Err(Error::TooFewNodes {
                count: nodes.len(),
                min: MIN_NODES,
            });
        }
        if let Some(bad) = nodes.iter().position(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvalidParameter(format!("node {bad} is not finite")));
        }
        let count = nodes.len();
        let closed_curve = mode == SurfaceMode::Curve2d && support == Support::Closed;
        let pairs = if closed_curve { count } else { count - 1 };
        for k in 0..pairs {
            let (a, b) = (nodes[k], nodes[(k + 1) % count]);
            let scale = 1.0 + a[0].abs().max(a[1].abs());
            if (b[0] - a[0]).hypot(b[1] - a[1]) <= 1e-14 * scale {
                return Err(Error::DuplicateNode((k + 1) % count));
            }
        }
        if mode == SurfaceMode::Axisymmetric {
            let axis_ends: &[usize] = if support == Support::Closed { &[0, count - 1] } else { &[0] };
            for &i in axis_ends {
                if nodes[i][0].abs() > AXIS_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "profile node {i} must lie on the axis, r = {}",
                        nodes[i][0]
                    )));
                }
                nodes[i][0] = 0.0;
            }
            let interior_end = if support == Support::Closed { count - 1 } else { count };
            if let Some(i) = (1..interior_end).find(|&i| nodes[i][0] <= 0.0) {
                return Err(Error::hypothesis(
                    Hypothesis::Embeddedness,
                    format!("profile node {i} has r = {} <= 0", nodes[i][0]),
                ));
            }
        }
        let mut surface = DiscreteHypersurface {
            mode,
            support,
            n,
            theta0,
            nodes,
            side: 1.0,
        };
        surface.check_support_contact()?;
        surface.check_domain()?;
        if let Some((i, j)) = planar::find_self_intersection(&surface.nodes, closed_curve) {
            return Err(Error::hypothesis(
                Hypothesis::Embeddedness,
                format!("segments {i} and {j} intersect"),
            ));
        }
        let area = planar::signed_area(&surface.enclosing_polygon());
        if area == 0.0 {
            return Err(Error::OpenBoundary);
        }
        surface.side = area.signum();
        Ok(surface)
    }

    pub fn mode(&self) -> SurfaceMode {
        self.mode
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    pub fn nodes(&self) -> &[P2] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Segments, i.e. the resolution of the discretization.
    pub fn resolution(&self) -> usize {
        if self.is_closed_curve() {
            self.nodes.len()
        } else {
            self.nodes.len() - 1
        }
    }

    /// `+1` when the outward normal is the clockwise rotation of the forward tangent.
    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn is_closed_curve(&self) -> bool {
        self.mode == SurfaceMode::Curve2d && self.support == Support::Closed
    }

    /// Indices of nodes lying on the support.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        match (self.support, self.mode) {
            (Support::Closed, _) => Vec::new(),
            (_, SurfaceMode::Curve2d) => vec![0, self.nodes.len() - 1],
            (_, SurfaceMode::Axisymmetric) => vec![self.nodes.len() - 1],
        }
    }

    /// Same mode, support and orientation with new node positions.
    pub fn with_nodes(&self, nodes: Vec<P2>) -> Result<Self> {
        let out = DiscreteHypersurface::new(self.mode, self.support, self.n, self.theta0, nodes)?;
        if out.side != self.side {
            return Err(Error::hypothesis(Hypothesis::Embeddedness, "orientation reversed"));
        }
        Ok(out)
    }

    pub(crate) fn chain(&self) -> Chain<'_> {
        let axis = self.mode == SurfaceMode::Axisymmetric;
        Chain {
            points: &self.nodes,
            mode: self.mode,
            n: self.n,
            closed: self.is_closed_curve(),
            start: if axis { ChainEnd::Axis } else { ChainEnd::Open },
            end: if axis && self.support == Support::Closed {
                ChainEnd::Axis
            } else {
                ChainEnd::Open
            },
            side: self.side,
        }
    }

    fn check_support_contact(&self) -> Result<()> {
        for i in self.boundary_nodes() {
            let p = self.nodes[i];
            let gap = match self.support {
                Support::Ball => (p[0].hypot(p[1]) - 1.0).abs(),
                Support::HalfSpace => p[1].abs(),
                Support::Closed => 0.0,
            };
            if gap > SUPPORT_TOL {
                return Err(Error::hypothesis(
                    Hypothesis::SupportContact,
                    format!("boundary node {i} is {gap:e} away from the support"),
                ));
            }
        }
        Ok(())
    }

    fn check_domain(&self) -> Result<()> {
        let bound = self.theta0.cos().abs();
        let boundary = self.boundary_nodes();
        for (i, p) in self.nodes.iter().enumerate() {
            let violation = match self.support {
                Support::Ball => {
                    let outside = p[0].hypot(p[1]) > 1.0 + SUPPORT_TOL;
                    let low = p[1] <= bound;
                    if outside {
                        Some(format!("node {i} lies outside the unit ball"))
                    } else if low {
                        Some(format!("node {i} has height {} <= |cos theta0| = {bound}", p[1]))
                    } else {
                        None
                    }
                }
                Support::HalfSpace if p[1] < -SUPPORT_TOL || (p[1] <= 0.0 && !boundary.contains(&i)) => {
                    Some(format!("node {i} has height {} outside the upper half-space", p[1]))
                }
                _ => None,
            };
            if let Some(detail) = violation {
                return Err(Error::hypothesis(Hypothesis::Domain, detail));
            }
        }
        Ok(())
    }

    /// Closed polygon around `Omega`: the nodes, then the support portion, then
    /// the axis for profiles.
    pub(crate) fn enclosing_polygon(&self) -> Vec<P2> {
        let mut poly = self.nodes.clone();
        let last = *self.nodes.last().unwrap();
        let first = self.nodes[0];
        match (self.support, self.mode) {
            (Support::Closed, _) => {}
            (Support::HalfSpace, SurfaceMode::Curve2d) => {}
            (Support::HalfSpace, SurfaceMode::Axisymmetric) => poly.push([0.0, 0.0]),
            (Support::Ball, mode) => {
                let from = last[0].atan2(last[1]);
                let to = match mode {
                    SurfaceMode::Curve2d => first[0].atan2(first[1]),
                    SurfaceMode::Axisymmetric => 0.0,
                };
                for k in 1..ARC_SAMPLES {
                    let phi = from + (to - from) * k as f64 / ARC_SAMPLES as f64;
                    poly.push([phi.sin(), phi.cos()]);
                }
                if mode == SurfaceMode::Axisymmetric {
                    poly.push([0.0, 1.0]);
                }
            }
        }
        poly
    }

    pub fn geometry(&self) -> Result<SurfaceGeometry> {
        let mut geom = chain_geometry(&self.chain());
        if geom.mean_curvature.iter().chain(&geom.area_element).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("degenerate node distribution".into()));
        }
        geom.contact_angles = self
            .boundary_nodes()
            .into_iter()
            .map(|i| {
                let p = self.nodes[i];
                let nu = geom.normal[i];
                let cos = match self.support {
                    Support::Ball => -(nu[0] * p[0] + nu[1] * p[1]) / p[0].hypot(p[1]),
                    _ => nu[1],
                };
                ContactAngle {
                    node: i,
                    theta: cos.clamp(-1.0, 1.0).acos(),
                }
            })
            .collect();
        Ok(geom)
    }

    /// Strict mean convexity, the angle bound `theta(x) <= theta0` and
    /// transversality, in that order.
    pub fn check_hypotheses(&self, geom: &SurfaceGeometry) -> Result<()> {
        if let Some(i) = geom.mean_curvature.iter().position(|&h| !(h > 0.0)) {
            return Err(Error::hypothesis(
                Hypothesis::MeanConvexity,
                format!("H = {:e} at node {i}", geom.mean_curvature[i]),
            ));
        }
        for ca in &geom.contact_angles {
            if ca.theta > self.theta0 + ANGLE_TOL {
                return Err(Error::hypothesis(
                    Hypothesis::ContactAngle,
                    format!("theta = {} exceeds theta0 = {} at node {}", ca.theta, self.theta0, ca.node),
                ));
            }
            if !(ca.theta > ANGLE_TOL && ca.theta < std::f64::consts::PI - ANGLE_TOL) {
                return Err(Error::hypothesis(
                    Hypothesis::Transversality,
                    format!("tangential contact at node {}", ca.node),
                ));
            }
        }
        Ok(())
    }

    /// Geometry after checking every hypothesis of the inequalities.
    pub fn validated_geometry(&self) -> Result<SurfaceGeometry> {
        let geom = self.geometry()?;
        self.check_hypotheses(&geom)?;
        Ok(geom)
    }

    /// `int_Omega weight`, by the divergence theorem over `Sigma` and the support portion.
    pub fn enclosed_integral(&self, geom: &SurfaceGeometry, weight: Weight) -> f64 {
        let n = self.n as f64;
        let ball = self.support == Support::Ball;
        let surface: f64 = self
            .nodes
            .iter()
            .zip(&geom.normal)
            .zip(&geom.area_element)
            .map(|((p, nu), da)| {
                let x_dot_nu = p[0] * nu[0] + p[1] * nu[1];
                let flux = match weight {
                    Weight::One => x_dot_nu / (n + 1.0),
                    Weight::Height if ball => {
                        let x = conformal_field(p);
                        (x[0] * nu[0] + x[1] * nu[1]) / (n + 1.0)
                    }
                    Weight::Height => 0.5 * p[1] * p[1] * nu[1],
                };
                flux * da
            })
            .sum();
        let support = match (weight, ball) {
            (Weight::One, true) => self.support_area() / (n + 1.0),
            _ => 0.0,
        };
        surface + support
    }

    /// Measure of the support portion of `partial Omega` (ball mode only).
    pub fn support_area(&self) -> f64 {
        if self.support != Support::Ball {
            return 0.0;
        }
        let last = *self.nodes.last().unwrap();
        match self.mode {
            SurfaceMode::Curve2d => {
                let first = self.nodes[0];
                (first[0].atan2(first[1]) - last[0].atan2(last[1])).abs()
            }
            SurfaceMode::Axisymmetric => {
                let phi_b = last[0].atan2(last[1]);
                let k = self.n - 1;
                // Composite Simpson for int_0^phi_b sin^k.
                let m = SUPPORT_QUADRATURE;
                let h = phi_b / m as f64;
                let mut acc = 0.0;
                for j in 0..=m {
                    let w = if j == 0 || j == m {
                        1.0
                    } else if j % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    acc += w * (j as f64 * h).sin().powi(k as i32);
                }
                sphere_measure(k) * acc * h / 3.0
            }
        }
    }
}

/// `sum_i f_i dA_i`.
pub fn surface_integral(geom: &SurfaceGeometry, f: &[f64]) -> f64 {
    f.iter().zip(&geom.area_element).map(|(v, da)| v * da).sum()
}

/// `X_{n+1} = x_{n+1} x - (|x|^2 + 1)/2 E_{n+1}`, the conformal Killing field
/// with `div X_{n+1} = (n+1) x_{n+1}`.
pub fn conformal_field<T>(x: &[T]) -> Vec<T>
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<Output = T> + From<f64>,
{
    let dim = x.len();
    let z = x[dim - 1];
    let sq = x.iter().fold(T::from(0.0), |acc, &c| acc + c * c);
    let mut out: Vec<T> = x.iter().map(|&c| z * c).collect();
    out[dim - 1] = out[dim - 1] - T::from(0.5) * (sq + T::from(1.0));
    out
}
