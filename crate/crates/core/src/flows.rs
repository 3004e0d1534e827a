//! Geodesic normal flows of discrete hypersurfaces.
//!
//! Each node follows the geodesic leaving the initial surface along its unit
//! normal (`F`-unit in capillary modes), pointing into the enclosed region:
//!
//! | mode                   | sea metric            | wind              | velocity at `t = 0`        |
//! |------------------------|-----------------------|-------------------|----------------------------|
//! | `FreeBoundaryBall`     | `x_{n+1}^{-2} delta`  | `0`               | `-x_{n+1} nu`              |
//! | `CapillaryBall`        | `x_{n+1}^{-2} delta`  | `cos theta0 E`    | `-x_{n+1} nu - cos theta0 E` |
//! | `CapillaryHalfspace`   | `delta`               | `-cos theta0 E`   | `-(nu - cos theta0 E)`     |
//!
//! Nodes move with the full velocity, tangential part included, so every
//! node is a Lagrangian marker and its area element ratio is the Jacobian of
//! the normal exponential map. Nodes are excised permanently when that
//! Jacobian vanishes (a neighbouring segment collapses or flips), when they
//! leave the domain, or when the front intersects itself.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesics::MeridianGeodesic;
use crate::surfaces::planar::{contains, find_self_intersection, signed_area};
use crate::surfaces::{
    arclength_derivative, chain_geometry, write_nodes, Chain, ChainEnd, DiscreteHypersurface, Support, SurfaceMode,
    MIN_PROFILE_RUN, P2,
};

/// Jacobians at or below this count as focal.
pub const JACOBIAN_FLOOR: f64 = 1e-12;
/// Allowed distance outside the unit ball or below the plane.
pub const EXIT_TOL: f64 = 1e-8;
/// Longest RK4 substep for geodesic nodes.
pub const MAX_SUBSTEP: f64 = 1e-3;
/// Monotonicity and equality tolerance is this times `(h^2 + dt^2) |Sigma|`.
pub const TOLERANCE_FACTOR: f64 = 5.0;
/// Hard cap on the number of steps of one run.
pub const MAX_FLOW_STEPS: usize = 1_000_000;

const MIN_CURVE_RUN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowMode {
    FreeBoundaryBall,
    CapillaryBall,
    CapillaryHalfspace,
}

impl FlowMode {
    pub fn support(self) -> Support {
        match self {
            FlowMode::CapillaryHalfspace => Support::HalfSpace,
            _ => Support::Ball,
        }
    }

    fn wind(self, theta0: f64) -> f64 {
        match self {
            FlowMode::FreeBoundaryBall => 0.0,
            _ => theta0.cos(),
        }
    }

    /// Factor `eta` in the swept measure `eta w dA dt`: `x_{n+1}` in the ball, `1` in the half-space.
    fn height_factor(self, z: f64) -> f64 {
        match self {
            FlowMode::CapillaryHalfspace => 1.0,
            _ => z,
        }
    }

    /// Normal speed `w` from the height and `nu_z`.
    fn weight(self, c: f64, z: f64, nu_z: f64) -> f64 {
        match self {
            FlowMode::FreeBoundaryBall => z,
            FlowMode::CapillaryBall => z + c * nu_z,
            FlowMode::CapillaryHalfspace => 1.0 - c * nu_z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Excision {
    /// Jacobian reached zero: a neighbouring segment collapsed or flipped.
    Focal,
    DomainExit,
    /// A profile node crossed the rotation axis.
    AxisCrossing,
    SelfIntersection,
    /// Left in an active run too short for geometry.
    ShortRun,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Excised {
    pub reason: Excision,
    pub t: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowNode {
    pub position: P2,
    /// Euclidean velocity `d position / dt`.
    pub velocity: P2,
    /// Outward normal `nu` of the current front.
    pub normal: P2,
    pub tangent: P2,
    pub mean_curvature: f64,
    pub second_form_sq: f64,
    /// Normal speed `w` of the mode.
    pub weight: f64,
    pub area_element: f64,
    /// Area element ratio from node positions.
    pub jacobian: f64,
    /// Area element ratio integrated from `(-f H + div tau)`.
    pub jacobian_ode: f64,
    pub excised: Option<Excised>,
    initial: P2,
    #[serde(skip)]
    geodesic: Option<MeridianGeodesic>,
    /// `-f H + div tau`.
    area_rate: f64,
    /// `Delta f + |h|^2 f + <tau, grad H>`.
    mean_curvature_rate: f64,
    /// Predicted `d n / dt` with `n = -nu`.
    normal_rate: P2,
}

impl FlowNode {
    pub fn is_active(&self) -> bool {
        self.excised.is_none()
    }

    pub fn initial_position(&self) -> P2 {
        self.initial
    }
}

/// The active part of the evolving front at one time.
#[derive(Debug, Clone, Serialize)]
pub struct FlowState {
    pub t: f64,
    pub mode: FlowMode,
    pub surface_mode: SurfaceMode,
    pub n: usize,
    pub theta0: f64,
    pub nodes: Vec<FlowNode>,
    /// `sum_active (w / H) dA`.
    pub q: f64,
    /// Swept measure `int_0^t int eta w dA ds`.
    pub v: f64,
    /// `int eta w dA` on the current front.
    pub swept_rate: f64,
    pub area: f64,
    pub min_mean_curvature: f64,
    /// Smallest weight on the active front; its sign is reported, not assumed.
    pub min_weight: f64,
    side: f64,
}

fn dot(a: P2, b: P2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn sub(a: P2, b: P2) -> P2 {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: P2) -> f64 {
    a[0].hypot(a[1])
}

/// Split a ball-mode velocity `x_{n+1} n - v0` (`v0 = c E`) into the normal
/// speed `x_{n+1} - <n, v0>` and the tangential part `-v0^T`.
pub fn split_ball_velocity(z: f64, n_delta: P2, c: f64) -> (f64, P2) {
    let f = z - c * n_delta[1];
    let tangential = [c * n_delta[1] * n_delta[0], -c + c * n_delta[1] * n_delta[1]];
    (f, tangential)
}

impl FlowState {
    /// Start a flow; every hypothesis of the mode is checked on `surface`.
    pub fn new(surface: &DiscreteHypersurface, mode: FlowMode) -> Result<Self> {
        if surface.support() != mode.support() {
            return Err(Error::InvalidParameter(format!(
                "{mode:?} needs {:?} support, surface has {:?}",
                mode.support(),
                surface.support()
            )));
        }
        let surface = if mode == FlowMode::FreeBoundaryBall && surface.theta0() != FRAC_PI_2 {
            DiscreteHypersurface::new(surface.mode(), surface.support(), surface.n(), FRAC_PI_2, surface.nodes().to_vec())?
        } else {
            surface.clone()
        };
        let geom = surface.validated_geometry()?;
        let c = mode.wind(surface.theta0());
        let profile = surface.mode() == SurfaceMode::Axisymmetric;
        let nodes = surface
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let mut nu = geom.normal[i];
                if profile && p[0] == 0.0 {
                    nu = [0.0, nu[1].signum()];
                }
                let (velocity, geodesic) = match mode {
                    FlowMode::CapillaryHalfspace => ([-nu[0], c - nu[1]], None),
                    _ => {
                        let v = [-p[1] * nu[0], -p[1] * nu[1] - c];
                        let g = MeridianGeodesic::new(c, p[0], p[1], v[0], v[1]);
                        let (vr, vz) = g.velocity(c);
                        ([vr, vz], Some(g))
                    }
                };
                FlowNode {
                    position: p,
                    velocity,
                    normal: nu,
                    tangent: geom.tangent[i],
                    mean_curvature: geom.mean_curvature[i],
                    second_form_sq: geom.second_form_sq[i],
                    weight: 0.0,
                    area_element: geom.area_element[i],
                    jacobian: 1.0,
                    jacobian_ode: 1.0,
                    excised: None,
                    initial: p,
                    geodesic,
                    area_rate: 0.0,
                    mean_curvature_rate: 0.0,
                    normal_rate: [0.0; 2],
                }
            })
            .collect();
        let mut state = FlowState {
            t: 0.0,
            mode,
            surface_mode: surface.mode(),
            n: surface.n(),
            theta0: surface.theta0(),
            nodes,
            q: 0.0,
            v: 0.0,
            swept_rate: 0.0,
            area: 0.0,
            min_mean_curvature: 0.0,
            min_weight: 0.0,
            side: surface.side(),
        };
        state.refresh()?;
        Ok(state)
    }

    pub fn active_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_active()).count()
    }

    pub fn active_positions(&self) -> Vec<P2> {
        self.nodes.iter().filter(|n| n.is_active()).map(|n| n.position).collect()
    }

    /// Largest `|J - J_ode|` over active nodes.
    pub fn jacobian_mismatch(&self) -> f64 {
        self.nodes
            .iter()
            .filter(|n| n.is_active())
            .map(|n| (n.jacobian - n.jacobian_ode).abs())
            .fold(0.0, f64::max)
    }

    /// Active nodes in the surface file format (all runs concatenated).
    pub fn write_snapshot<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        write_nodes(out, self.surface_mode, self.mode.support(), self.n, self.theta0, &self.active_positions())
    }

    fn cos_wind(&self) -> f64 {
        self.mode.wind(self.theta0)
    }

    fn min_run(&self) -> usize {
        match self.surface_mode {
            SurfaceMode::Curve2d => MIN_CURVE_RUN,
            SurfaceMode::Axisymmetric => MIN_PROFILE_RUN,
        }
    }

    fn excise(&mut self, i: usize, reason: Excision) {
        if self.nodes[i].excised.is_none() {
            self.nodes[i].excised = Some(Excised { reason, t: self.t });
        }
    }

    /// Maximal runs of consecutive active nodes.
    fn runs(&self) -> Vec<Vec<usize>> {
        let mut runs = Vec::new();
        let mut current = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if node.is_active() {
                current.push(i);
            } else if !current.is_empty() {
                runs.push(std::mem::take(&mut current));
            }
        }
        if !current.is_empty() {
            runs.push(current);
        }
        runs
    }

    /// Excise short runs and self-intersections, then recompute geometry,
    /// weights, rates and the functionals on what remains.
    fn refresh(&mut self) -> Result<()> {
        let runs = loop {
            let runs = self.runs();
            let mut changed = false;
            for run in &runs {
                if run.len() < self.min_run() {
                    for &i in run {
                        self.excise(i, Excision::ShortRun);
                    }
                    changed = true;
                    continue;
                }
                let pts: Vec<P2> = run.iter().map(|&i| self.nodes[i].position).collect();
                if let Some((a, b)) = find_self_intersection(&pts, false) {
                    for k in [a, a + 1, b, b + 1] {
                        self.excise(run[k], Excision::SelfIntersection);
                    }
                    changed = true;
                }
            }
            if !changed {
                break runs;
            }
        };
        if runs.is_empty() {
            return Err(Error::FlowExhausted { t: self.t });
        }
        let c = self.cos_wind();
        let n = self.n as f64;
        let profile = self.surface_mode == SurfaceMode::Axisymmetric;
        let (mut q, mut swept, mut area) = (0.0, 0.0, 0.0);
        let (mut min_h, mut min_w) = (f64::INFINITY, f64::INFINITY);
        for run in &runs {
            let pts: Vec<P2> = run.iter().map(|&i| self.nodes[i].position).collect();
            let axis_start = profile && run[0] == 0 && self.nodes[0].initial[0] == 0.0;
            let chain = Chain {
                points: &pts,
                mode: self.surface_mode,
                n: self.n,
                closed: false,
                start: if axis_start { ChainEnd::Axis } else { ChainEnd::Open },
                end: ChainEnd::Open,
                side: self.side,
            };
            let geom = chain_geometry(&chain);
            let m = run.len();
            let weight: Vec<f64> = (0..m).map(|k| self.mode.weight(c, pts[k][1], geom.normal[k][1])).collect();
            let tau: Vec<f64> = (0..m).map(|k| dot(self.nodes[run[k]].velocity, geom.tangent[k])).collect();
            let dtau = arclength_derivative(&pts, false, &tau);
            let df = arclength_derivative(&pts, false, &weight);
            let ddf = arclength_derivative(&pts, false, &df);
            let dh = arclength_derivative(&pts, false, &geom.mean_curvature);
            for k in 0..m {
                let i = run[k];
                let on_axis = axis_start && k == 0;
                let r = pts[k][0];
                let t_r = geom.tangent[k][0];
                let (div_tau, lap_f) = if !profile {
                    (dtau[k], ddf[k])
                } else if on_axis || r == 0.0 {
                    (n * dtau[k], n * ddf[k])
                } else {
                    (dtau[k] + (n - 1.0) * tau[k] * t_r / r, ddf[k] + (n - 1.0) * t_r / r * df[k])
                };
                let h = geom.mean_curvature[k];
                let f = -dot(self.nodes[i].velocity, geom.normal[k]);
                let node = &mut self.nodes[i];
                node.normal = geom.normal[k];
                node.tangent = geom.tangent[k];
                node.mean_curvature = h;
                node.second_form_sq = geom.second_form_sq[k];
                node.weight = weight[k];
                node.area_element = geom.area_element[k];
                node.area_rate = -f * h + div_tau;
                node.mean_curvature_rate = lap_f + geom.second_form_sq[k] * weight[k] + tau[k] * dh[k];
                let s = -(df[k] + geom.profile_curvature[k] * tau[k]);
                node.normal_rate = [s * geom.tangent[k][0], s * geom.tangent[k][1]];
                q += weight[k] / h * geom.area_element[k];
                swept += self.mode.height_factor(pts[k][1]) * weight[k] * geom.area_element[k];
                area += geom.area_element[k];
                min_h = min_h.min(h);
                min_w = min_w.min(weight[k]);
            }
        }
        self.q = q;
        self.swept_rate = swept;
        self.area = area;
        self.min_mean_curvature = min_h;
        self.min_weight = min_w;
        Ok(())
    }

    /// Lagrangian area ratio of node `i` from current and initial positions.
    fn geometric_jacobian(&self, i: usize) -> f64 {
        let active = |k: usize| self.nodes.get(k).is_some_and(|n| n.is_active());
        let a = if i > 0 && active(i - 1) { i - 1 } else { i };
        let b = if active(i + 1) { i + 1 } else { i };
        if a == b {
            return 0.0;
        }
        let now = norm(sub(self.nodes[b].position, self.nodes[a].position));
        let then = norm(sub(self.nodes[b].initial, self.nodes[a].initial));
        let stretch = now / then;
        match self.surface_mode {
            SurfaceMode::Curve2d => stretch,
            SurfaceMode::Axisymmetric => {
                let r0 = self.nodes[i].initial[0];
                let rot = if r0 == 0.0 { stretch } else { self.nodes[i].position[0] / r0 };
                stretch * rot.powi(self.n as i32 - 1)
            }
        }
    }
}

/// Advance every active node by `dt`, excise, and recompute the front.
pub fn flow_step(state: &FlowState, dt: f64) -> Result<FlowState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    let mut next = state.clone();
    next.t = state.t + dt;
    let c = state.cos_wind();
    let t = next.t;
    let substeps = (dt / MAX_SUBSTEP).ceil().max(1.0) as usize;
    let profile = state.surface_mode == SurfaceMode::Axisymmetric;
    let mode = state.mode;
    next.nodes.par_iter_mut().filter(|n| n.is_active()).for_each(|node| {
        match node.geodesic.as_mut() {
            Some(g) => {
                g.advance(c, dt, substeps);
                let (vr, vz) = g.velocity(c);
                node.position = [g.r, g.z];
                node.velocity = [vr, vz];
            }
            None => {
                node.position = [node.initial[0] + t * node.velocity[0], node.initial[1] + t * node.velocity[1]];
            }
        }
        if profile && node.initial[0] == 0.0 {
            node.position[0] = 0.0;
        }
        let p = node.position;
        let finite = p.iter().chain(&node.velocity).all(|v| v.is_finite());
        let outside = match mode {
            FlowMode::CapillaryHalfspace => p[1] < -EXIT_TOL,
            _ => norm(p) > 1.0 + EXIT_TOL || p[1] <= c.abs(),
        };
        if !finite || outside {
            node.excised = Some(Excised { reason: Excision::DomainExit, t });
        } else if profile && node.initial[0] > 0.0 && p[0] < 0.0 {
            node.excised = Some(Excised { reason: Excision::AxisCrossing, t });
        }
    });
    // Collapsed or reversed segments mark a focal point at both ends.
    for i in 0..next.nodes.len().saturating_sub(1) {
        if !(next.nodes[i].is_active() && next.nodes[i + 1].is_active()) {
            continue;
        }
        let before = sub(state.nodes[i + 1].position, state.nodes[i].position);
        let after = sub(next.nodes[i + 1].position, next.nodes[i].position);
        let initial = norm(sub(next.nodes[i + 1].initial, next.nodes[i].initial));
        if dot(before, after) <= 0.0 || norm(after) <= JACOBIAN_FLOOR * initial {
            next.excise(i, Excision::Focal);
            next.excise(i + 1, Excision::Focal);
        }
    }
    for i in 0..next.nodes.len() {
        if next.nodes[i].is_active() {
            let j = next.geometric_jacobian(i);
            next.nodes[i].jacobian = j;
            if j <= JACOBIAN_FLOOR {
                next.excise(i, Excision::Focal);
            }
        }
    }
    next.refresh()?;
    next.v = state.v + 0.5 * dt * (state.swept_rate + next.swept_rate);
    for (node, old) in next.nodes.iter_mut().zip(&state.nodes) {
        if node.is_active() {
            node.jacobian_ode = old.jacobian_ode * (0.5 * dt * (old.area_rate + node.area_rate)).exp();
        }
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeEvolution {
    pub node: usize,
    /// `H` recomputed from the advanced front.
    pub mean_curvature: f64,
    /// `H` propagated by `dH/dt = Delta f + |h|^2 f + <tau, grad H>`.
    pub predicted_mean_curvature: f64,
    /// `d(w/H)/dt + eta w / n`; non-positive up to discretization.
    pub inequality_residual: f64,
    /// `|h|^2 - H^2/n`, zero exactly at umbilic points.
    pub umbilicity: f64,
    /// `|dn/dt + grad f + h(., tau)|`.
    pub normal_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionReport {
    pub t: f64,
    pub dt: f64,
    pub nodes: Vec<NodeEvolution>,
    /// Largest `|H - H_pred| / H`.
    pub max_mean_curvature_mismatch: f64,
    pub max_inequality_residual: f64,
    pub max_normal_residual: f64,
}

/// Take one step of `dt` from `state` and compare the evolution equations
/// against the advanced geometry at every node active at both times. The
/// state itself is left untouched.
pub fn track_evolution(state: &FlowState, dt: f64) -> Result<EvolutionReport> {
    let next = flow_step(state, dt)?;
    let n = state.n as f64;
    let mode = state.mode;
    let nodes: Vec<NodeEvolution> = state
        .nodes
        .iter()
        .zip(&next.nodes)
        .enumerate()
        .filter(|(_, (a, b))| a.is_active() && b.is_active())
        .map(|(i, (a, b))| {
            let predicted = a.mean_curvature + 0.5 * dt * (a.mean_curvature_rate + b.mean_curvature_rate);
            let ratio_rate = (b.weight / b.mean_curvature - a.weight / a.mean_curvature) / dt;
            let bound = 0.5
                * (mode.height_factor(a.position[1]) * a.weight + mode.height_factor(b.position[1]) * b.weight)
                / n;
            // n = -nu, so dn/dt = -(nu_1 - nu_0)/dt.
            let dn = [-(b.normal[0] - a.normal[0]) / dt, -(b.normal[1] - a.normal[1]) / dt];
            let predicted_dn = [
                0.5 * (a.normal_rate[0] + b.normal_rate[0]),
                0.5 * (a.normal_rate[1] + b.normal_rate[1]),
            ];
            NodeEvolution {
                node: i,
                mean_curvature: b.mean_curvature,
                predicted_mean_curvature: predicted,
                inequality_residual: ratio_rate + bound,
                umbilicity: b.second_form_sq - b.mean_curvature * b.mean_curvature / n,
                normal_residual: norm(sub(dn, predicted_dn)),
            }
        })
        .collect();
    let fold = |f: &dyn Fn(&NodeEvolution) -> f64| nodes.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    Ok(EvolutionReport {
        t: state.t,
        dt,
        max_mean_curvature_mismatch: fold(&|e| {
            (e.mean_curvature - e.predicted_mean_curvature).abs() / e.mean_curvature.abs()
        }),
        max_inequality_residual: fold(&|e| e.inequality_residual),
        max_normal_residual: fold(&|e| e.normal_residual),
        nodes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowRecord {
    pub t: f64,
    pub q: f64,
    pub v: f64,
    pub active: usize,
    pub min_mean_curvature: f64,
    pub min_weight: f64,
    pub jacobian_mismatch: f64,
}

impl FlowRecord {
    fn of(s: &FlowState) -> Self {
        FlowRecord {
            t: s.t,
            q: s.q,
            v: s.v,
            active: s.active_count(),
            min_mean_curvature: s.min_mean_curvature,
            min_weight: s.min_weight,
            jacobian_mismatch: s.jacobian_mismatch(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowRun {
    pub mode: FlowMode,
    pub n: usize,
    pub dt: f64,
    /// Longest segment of the initial surface.
    pub mesh_size: f64,
    pub initial_area: f64,
    pub history: Vec<FlowRecord>,
    /// First time a node was excised as focal.
    pub first_focal_time: Option<f64>,
    /// Time at which every node had been excised, if reached.
    pub exhausted_at: Option<f64>,
    #[serde(skip)]
    pub final_state: FlowState,
}

impl FlowRun {
    fn factor(&self) -> f64 {
        (self.n as f64 + 1.0) / self.n as f64
    }

    /// `TOLERANCE_FACTOR (h^2 + dt^2) |Sigma|`.
    pub fn tolerance(&self) -> f64 {
        TOLERANCE_FACTOR * (self.mesh_size.powi(2) + self.dt.powi(2)) * self.initial_area
    }

    pub fn q_curve(&self) -> Vec<(f64, f64)> {
        self.history.iter().map(|r| (r.t, r.q)).collect()
    }

    /// Largest rise of `Q + (n+1)/n V` above its running minimum.
    pub fn monotonicity_violation(&self) -> f64 {
        let mut low = f64::INFINITY;
        let mut worst = 0.0f64;
        for r in &self.history {
            let m = r.q + self.factor() * r.v;
            worst = worst.max(m - low);
            low = low.min(m);
        }
        worst
    }

    /// Largest `|Q(0) - Q(t) - (n+1)/n V(t)|`.
    pub fn equality_residual(&self) -> f64 {
        let q0 = self.history[0].q;
        self.history
            .iter()
            .map(|r| (q0 - r.q - self.factor() * r.v).abs())
            .fold(0.0, f64::max)
    }

    /// Largest drop `Q(t) + (n+1)/n V(t) - Q(0)`; non-positive when the
    /// inequality `Q(0) - Q(t) >= (n+1)/n V(t)` holds.
    pub fn inequality_excess(&self) -> f64 {
        let q0 = self.history[0].q;
        self.history
            .iter()
            .map(|r| r.q + self.factor() * r.v - q0)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `t,q,v,active` rows with a header.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "t,q,v,active,min_mean_curvature,min_weight,jacobian_mismatch")?;
        for r in &self.history {
            writeln!(
                out,
                "{:?},{:?},{:?},{},{:?},{:?},{:?}",
                r.t, r.q, r.v, r.active, r.min_mean_curvature, r.min_weight, r.jacobian_mismatch
            )?;
        }
        Ok(())
    }
}

fn mesh_size(nodes: &[P2]) -> f64 {
    nodes.windows(2).map(|w| norm(sub(w[1], w[0]))).fold(0.0, f64::max)
}

/// `min(0.25 / (min H max w), h)` on the initial front.
pub fn default_time_step(state: &FlowState, mesh: f64) -> f64 {
    let max_w = state
        .nodes
        .iter()
        .filter(|n| n.is_active())
        .map(|n| n.weight)
        .fold(0.0, f64::max);
    let bound = 0.25 / (state.min_mean_curvature * max_w);
    if bound.is_finite() && bound > 0.0 {
        bound.min(mesh)
    } else {
        mesh
    }
}

/// [`run_flow_with`] without an observer.
pub fn run_flow(surface: &DiscreteHypersurface, mode: FlowMode, dt: Option<f64>, t_max: f64) -> Result<FlowRun> {
    run_flow_with(surface, mode, dt, t_max, |_| {})
}

/// Run with a fixed step (by default [`default_time_step`] at `t = 0`) until
/// `t_max` or exhaustion; `observe` sees every state, the initial one included.
pub fn run_flow_with<F: FnMut(&FlowState)>(
    surface: &DiscreteHypersurface,
    mode: FlowMode,
    dt: Option<f64>,
    t_max: f64,
    mut observe: F,
) -> Result<FlowRun> {
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidParameter(format!("t_max must be positive and finite, got {t_max}")));
    }
    let mut state = FlowState::new(surface, mode)?;
    let mesh = mesh_size(surface.nodes());
    let dt = match dt {
        Some(dt) if !(dt > 0.0) || !dt.is_finite() => {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")))
        }
        Some(dt) => dt,
        None => default_time_step(&state, mesh),
    };
    if t_max / dt > MAX_FLOW_STEPS as f64 {
        return Err(Error::InvalidParameter(format!("{} steps exceed the cap of {MAX_FLOW_STEPS}", t_max / dt)));
    }
    observe(&state);
    let mut history = vec![FlowRecord::of(&state)];
    let initial_area = state.area;
    let mut exhausted_at = None;
    while state.t < t_max - 1e-12 * dt {
        let step = dt.min(t_max - state.t);
        match flow_step(&state, step) {
            Ok(next) => {
                state = next;
                observe(&state);
                history.push(FlowRecord::of(&state));
            }
            Err(Error::FlowExhausted { t }) => {
                history.push(FlowRecord {
                    t,
                    q: 0.0,
                    v: state.v + 0.5 * step * state.swept_rate,
                    active: 0,
                    min_mean_curvature: f64::NAN,
                    min_weight: f64::NAN,
                    jacobian_mismatch: 0.0,
                });
                exhausted_at = Some(t);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let first_focal_time = state
        .nodes
        .iter()
        .filter_map(|n| n.excised)
        .filter(|e| e.reason == Excision::Focal)
        .map(|e| e.t)
        .fold(None, |m: Option<f64>, t| Some(m.map_or(t, |m| m.min(t))));
    let first_focal_time = match (first_focal_time, exhausted_at) {
        (Some(t), _) => Some(t),
        // The final step may collapse every node at once.
        (None, Some(t)) => Some(t),
        (None, None) => None,
    };
    Ok(FlowRun {
        mode,
        n: surface.n(),
        dt,
        mesh_size: mesh,
        initial_area,
        history,
        first_focal_time,
        exhausted_at,
        final_state: state,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageReport {
    pub samples: usize,
    pub covered: usize,
    pub fraction: f64,
    pub resolution: usize,
}

/// Points visited by the active nodes, each with the local cell size
/// `max(adjacent segment, |velocity| dt)` as its reach.
struct SweptFamily {
    cell: f64,
    grid: HashMap<(i64, i64), Vec<(P2, f64)>>,
}

impl SweptFamily {
    fn new(points: Vec<(P2, f64)>) -> Self {
        let cell = points.iter().map(|p| p.1).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut grid: HashMap<(i64, i64), Vec<(P2, f64)>> = HashMap::new();
        for p in points {
            grid.entry(Self::key(cell, p.0)).or_default().push(p);
        }
        SweptFamily { cell, grid }
    }

    fn key(cell: f64, p: P2) -> (i64, i64) {
        ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64)
    }

    fn covers(&self, p: P2) -> bool {
        let (kx, ky) = Self::key(self.cell, p);
        (kx - 1..=kx + 1).any(|gx| {
            (ky - 1..=ky + 1).any(|gy| {
                self.grid
                    .get(&(gx, gy))
                    .is_some_and(|bucket| bucket.iter().any(|(q, reach)| norm(sub(p, *q)) <= *reach))
            })
        })
    }
}

/// Fraction of uniform samples of `Omega` passed within local resolution by
/// the swept family of the flow, run to exhaustion.
pub fn coverage_check(
    surface: &DiscreteHypersurface,
    mode: FlowMode,
    samples: usize,
    dt: Option<f64>,
    seed: u64,
) -> Result<CoverageReport> {
    if samples == 0 {
        return Err(Error::InvalidParameter("at least one sample is needed".into()));
    }
    let polygon = surface.enclosing_polygon();
    if signed_area(&polygon).abs() <= 1e-14 {
        return Err(Error::InvalidParameter("degenerate enclosed region".into()));
    }
    let dt = match dt {
        Some(dt) => dt,
        None => {
            let state = FlowState::new(surface, mode)?;
            default_time_step(&state, mesh_size(surface.nodes()))
        }
    };
    let mut swept = Vec::new();
    // Runs end at exhaustion; the horizon only has to respect the step cap.
    let horizon = 1e3f64.min(0.5 * MAX_FLOW_STEPS as f64 * dt);
    run_flow_with(surface, mode, Some(dt), horizon, |s| {
        for (i, node) in s.nodes.iter().enumerate() {
            if !node.is_active() {
                continue;
            }
            let neighbour = |k: usize| {
                s.nodes
                    .get(k)
                    .filter(|m| m.is_active())
                    .map_or(0.0, |m| norm(sub(m.position, node.position)))
            };
            let left = if i > 0 { neighbour(i - 1) } else { 0.0 };
            let reach = left.max(neighbour(i + 1)).max(norm(node.velocity) * dt);
            swept.push((node.position, reach));
        }
    })?;
    let family = SweptFamily::new(swept);
    let (lo, hi) = polygon.iter().fold(([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]), |(lo, hi), p| {
        ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])])
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let profile = surface.mode() == SurfaceMode::Axisymmetric;
    let mut drawn = 0;
    let mut covered = 0;
    let mut attempts = 0usize;
    while drawn < samples {
        attempts += 1;
        if attempts > 1000 * samples {
            return Err(Error::InvalidParameter("enclosed region too thin to sample".into()));
        }
        let x = if profile {
            // Density proportional to r^{n-1} in the meridian half-plane.
            hi[0] * rng.gen::<f64>().powf(1.0 / surface.n() as f64)
        } else {
            rng.gen_range(lo[0]..hi[0])
        };
        let p = [x, rng.gen_range(lo[1]..hi[1])];
        if !contains(&polygon, p) {
            continue;
        }
        drawn += 1;
        if family.covers(p) {
            covered += 1;
        }
    }
    Ok(CoverageReport {
        samples,
        covered,
        fraction: covered as f64 / samples as f64,
        resolution: surface.resolution(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesics::hyperbolic_geodesic;
    use crate::metrics::AmbientPoint;
    use crate::surfaces::{cap, perturb, CapKind, Perturbation};
    use nalgebra::DVector;
    use std::f64::consts::FRAC_PI_3;

    fn halfspace_cap(theta0: f64, segments: usize) -> DiscreteHypersurface {
        cap(CapKind::HalfspaceCapillary, SurfaceMode::Axisymmetric, 2, theta0, 1.0, segments).unwrap()
    }

    #[test]
    fn halfspace_fronts_are_parallel_caps() {
        let s = halfspace_cap(FRAC_PI_3, 64);
        let c = FRAC_PI_3.cos();
        let state = FlowState::new(&s, FlowMode::CapillaryHalfspace).unwrap();
        let next = flow_step(&flow_step(&state, 0.1).unwrap(), 0.15).unwrap();
        for node in &next.nodes {
            // Radius R - t about the center C + t c E.
            let radius = node.position[0].hypot(node.position[1] + c - 0.25 * c);
            assert!((radius - 0.75).abs() < 1e-9, "{}", radius - 0.75);
            assert!((node.mean_curvature - 2.0 / 0.75).abs() < 1e-3, "{}", node.mean_curvature - 2.0 / 0.75);
        }
        // Boundary stays on the plane.
        assert!(next.nodes.last().unwrap().position[1].abs() < 1e-14);
    }

    #[test]
    fn halfspace_focal_time_is_the_radius() {
        let s = halfspace_cap(FRAC_PI_3, 64);
        let dt = 0.013;
        let run = run_flow(&s, FlowMode::CapillaryHalfspace, Some(dt), 3.0).unwrap();
        let focal = run.first_focal_time.unwrap();
        assert!((focal - 1.0).abs() <= dt, "{focal}");
        assert!(run.exhausted_at.is_some());
    }

    #[test]
    fn free_boundary_nodes_follow_hyperbolic_geodesics() {
        let s = cap(CapKind::BallFreeBoundary, SurfaceMode::Axisymmetric, 2, FRAC_PI_2, 0.4, 32).unwrap();
        let state = FlowState::new(&s, FlowMode::FreeBoundaryBall).unwrap();
        let mut cur = state.clone();
        for _ in 0..10 {
            cur = flow_step(&cur, 0.02).unwrap();
        }
        for (a, b) in state.nodes.iter().zip(&cur.nodes) {
            let p = AmbientPoint::from_slice(&a.position).unwrap();
            let v = DVector::from_vec(a.velocity.to_vec());
            let (x, _) = hyperbolic_geodesic(&p, &v, 0.2).unwrap();
            let err = (x[0] - b.position[0]).hypot(x[1] - b.position[1]);
            assert!(err < 1e-6, "{err}");
        }
    }

    #[test]
    fn ball_boundary_nodes_stay_on_the_sphere() {
        for theta0 in [FRAC_PI_3, 2.0 * FRAC_PI_3] {
            let s = cap(CapKind::BallCapillary, SurfaceMode::Axisymmetric, 2, theta0, 0.3, 64).unwrap();
            let mut state = FlowState::new(&s, FlowMode::CapillaryBall).unwrap();
            for _ in 0..20 {
                state = flow_step(&state, 0.005).unwrap();
            }
            let last = state.nodes.last().unwrap();
            assert!(last.is_active());
            assert!((norm(last.position) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn ball_velocity_is_the_normal_split() {
        let s = cap(CapKind::BallCapillary, SurfaceMode::Curve2d, 1, FRAC_PI_3, 0.3, 64).unwrap();
        let state = FlowState::new(&s, FlowMode::CapillaryBall).unwrap();
        let c = FRAC_PI_3.cos();
        for node in &state.nodes {
            let n_delta = [-node.normal[0], -node.normal[1]];
            let (f, tan) = split_ball_velocity(node.position[1], n_delta, c);
            let rebuilt = [f * n_delta[0] + tan[0], f * n_delta[1] + tan[1]];
            assert!(norm(sub(rebuilt, node.velocity)) < 1e-12);
            assert!(dot(tan, n_delta).abs() < 1e-12);
        }
    }

    #[test]
    fn step_halving_is_consistent() {
        let s = cap(CapKind::BallCapillary, SurfaceMode::Axisymmetric, 2, FRAC_PI_3, 0.3, 32).unwrap();
        let state = FlowState::new(&s, FlowMode::CapillaryBall).unwrap();
        let dt = 0.01;
        let one = flow_step(&state, dt).unwrap();
        let two = flow_step(&flow_step(&state, dt / 2.0).unwrap(), dt / 2.0).unwrap();
        for (a, b) in one.nodes.iter().zip(&two.nodes) {
            assert!(norm(sub(a.position, b.position)) < dt.powi(3));
        }
    }

    #[test]
    fn cap_equality_and_monotonicity() {
        let s = cap(CapKind::BallCapillary, SurfaceMode::Axisymmetric, 2, FRAC_PI_3, 0.3, 128).unwrap();
        let run = run_flow(&s, FlowMode::CapillaryBall, None, 5.0).unwrap();
        assert!(run.exhausted_at.is_some());
        let tol = run.tolerance();
        assert!(run.monotonicity_violation() <= tol, "{} vs {tol}", run.monotonicity_violation());
        assert!(run.equality_residual() <= tol, "{} vs {tol}", run.equality_residual());
    }

    #[test]
    fn evolution_equations_hold_on_caps() {
        let s = halfspace_cap(FRAC_PI_3, 128);
        let state = flow_step(&FlowState::new(&s, FlowMode::CapillaryHalfspace).unwrap(), 0.1).unwrap();
        let rep = track_evolution(&state, 0.01).unwrap();
        assert!(rep.max_mean_curvature_mismatch < 1e-3, "{}", rep.max_mean_curvature_mismatch);
        assert!(rep.max_inequality_residual.abs() < 1e-3, "{}", rep.max_inequality_residual);
        assert!(rep.max_normal_residual < 1e-2, "{}", rep.max_normal_residual);
        for e in &rep.nodes {
            assert!(e.umbilicity.abs() < 1e-3);
        }
    }

    #[test]
    fn perturbed_surface_is_strictly_below_the_bound() {
        let s = cap(CapKind::BallCapillary, SurfaceMode::Axisymmetric, 2, FRAC_PI_3, 0.3, 128).unwrap();
        let p = perturb(&s, Perturbation { amplitude: 2e-3, frequency: 2, seed: 11 }).unwrap();
        let state = FlowState::new(&p, FlowMode::CapillaryBall).unwrap();
        let rep = track_evolution(&state, 1e-3).unwrap();
        let strict = rep.nodes.iter().filter(|e| e.umbilicity > 1e-2).count();
        assert!(strict > 0);
        for e in rep.nodes.iter().filter(|e| e.umbilicity > 1e-2) {
            assert!(e.inequality_residual < 0.0, "{e:?}");
        }
    }

    #[test]
    fn bad_inputs() {
        let s = halfspace_cap(FRAC_PI_3, 32);
        assert!(FlowState::new(&s, FlowMode::CapillaryBall).is_err());
        let state = FlowState::new(&s, FlowMode::CapillaryHalfspace).unwrap();
        assert!(flow_step(&state, 0.0).is_err());
        assert!(flow_step(&state, -1.0).is_err());
    }

    #[test]
    fn halfspace_coverage() {
        let s = halfspace_cap(FRAC_PI_3, 64);
        let rep = coverage_check(&s, FlowMode::CapillaryHalfspace, 2000, None, 1).unwrap();
        assert!(rep.fraction >= 0.995, "{rep:?}");
    }
}
