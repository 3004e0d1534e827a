//! Heintze-Karcher functionals, the Minkowski-type identity, and refinement
//! sweeps with observed convergence orders.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::surfaces::{
    conformal_field, surface_integral, DiscreteHypersurface, Support, SurfaceGeometry, Weight,
};

/// Relative `|deficit| / rhs` below which a report is flagged as an equality case.
pub const EQUALITY_TOL: f64 = 1e-4;
/// Relative errors below this are treated as converged to roundoff.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;
/// Spread of boundary contact angles tolerated for "constant angle".
pub const CONSTANT_ANGLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HkMode {
    Ball,
    FreeBoundary,
    Halfspace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergencePoint {
    pub resolution: usize,
    pub deficit: f64,
}

/// The weaker capillary inequality `int z/H >= (n+1)/n int_Omega z - cos theta0 (int nu_z)^2 / int H nu_z`,
/// reported alongside ball-mode results for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeakerForm {
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HKReport {
    pub mode: HkMode,
    pub theta0: f64,
    pub n: usize,
    pub resolution: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub deficit: f64,
    pub minkowski_residual: f64,
    pub monotonicity_violation: f64,
    pub equality: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weaker_form: Option<WeakerForm>,
    pub convergence: Vec<ConvergencePoint>,
    pub runtime_ms: u64,
}

impl HKReport {
    pub fn relative_deficit(&self) -> f64 {
        self.deficit / self.rhs.abs().max(f64::MIN_POSITIVE)
    }
}

fn require_support(s: &DiscreteHypersurface, support: Support) -> Result<()> {
    if s.support() != support {
        return Err(Error::InvalidParameter(format!(
            "surface has {:?} support, expected {:?}",
            s.support(),
            support
        )));
    }
    Ok(())
}

/// Rebuild `s` with the given `theta0` so every hypothesis is checked against it.
fn with_theta0(s: &DiscreteHypersurface, theta0: f64) -> Result<DiscreteHypersurface> {
    if s.theta0() == theta0 {
        return Ok(s.clone());
    }
    DiscreteHypersurface::new(s.mode(), s.support(), s.n(), theta0, s.nodes().to_vec())
}

fn report(
    mode: HkMode,
    s: &DiscreteHypersurface,
    theta0: f64,
    lhs: f64,
    rhs: f64,
    minkowski_residual: f64,
    weaker_form: Option<WeakerForm>,
    started: Instant,
) -> HKReport {
    let deficit = lhs - rhs;
    HKReport {
        mode,
        theta0,
        n: s.n(),
        resolution: s.resolution(),
        lhs,
        rhs,
        deficit,
        minkowski_residual,
        monotonicity_violation: 0.0,
        equality: deficit.abs() <= EQUALITY_TOL * rhs.abs(),
        weaker_form,
        convergence: Vec::new(),
        runtime_ms: started.elapsed().as_millis() as u64,
    }
}

/// `int_Sigma (x_{n+1} + cos theta0 <nu, E>) / H` against `(n+1)/n int_Omega x_{n+1}`.
pub fn hk_ball(surface: &DiscreteHypersurface, theta0: f64) -> Result<HKReport> {
    let started = Instant::now();
    require_support(surface, Support::Ball)?;
    let s = with_theta0(surface, theta0)?;
    let geom = s.validated_geometry()?;
    let c = theta0.cos();
    let n = s.n() as f64;
    let weights: Vec<f64> = (0..geom.len())
        .map(|i| (geom.height[i] + c * geom.normal[i][1]) / geom.mean_curvature[i])
        .collect();
    let lhs = surface_integral(&geom, &weights);
    let enclosed = s.enclosed_integral(&geom, Weight::Height);
    let rhs = (n + 1.0) / n * enclosed;
    let weaker = weaker_form(&geom, c, n, enclosed);
    let mink = ball_minkowski_residual(&s, &geom, c);
    Ok(report(HkMode::Ball, &s, theta0, lhs, rhs, mink, Some(weaker), started))
}

/// The free-boundary inequality `int x_{n+1}/H >= (n+1)/n int_Omega x_{n+1}`.
pub fn hk_free_boundary(surface: &DiscreteHypersurface) -> Result<HKReport> {
    let started = Instant::now();
    require_support(surface, Support::Ball)?;
    let theta0 = std::f64::consts::FRAC_PI_2;
    let s = with_theta0(surface, theta0)?;
    let geom = s.validated_geometry()?;
    let n = s.n() as f64;
    let weights: Vec<f64> = (0..geom.len()).map(|i| geom.height[i] / geom.mean_curvature[i]).collect();
    let lhs = surface_integral(&geom, &weights);
    let rhs = (n + 1.0) / n * s.enclosed_integral(&geom, Weight::Height);
    let mink = ball_minkowski_residual(&s, &geom, 0.0);
    Ok(report(HkMode::FreeBoundary, &s, theta0, lhs, rhs, mink, None, started))
}

/// `int_Sigma (1 - cos theta0 <nu, E>) / H` against `(n+1)/n |Omega|`.
pub fn hk_halfspace(surface: &DiscreteHypersurface, theta0: f64) -> Result<HKReport> {
    let started = Instant::now();
    require_support(surface, Support::HalfSpace)?;
    let s = with_theta0(surface, theta0)?;
    let geom = s.validated_geometry()?;
    let c = theta0.cos();
    let n = s.n() as f64;
    let weights: Vec<f64> = (0..geom.len())
        .map(|i| (1.0 - c * geom.normal[i][1]) / geom.mean_curvature[i])
        .collect();
    let lhs = surface_integral(&geom, &weights);
    let rhs = (n + 1.0) / n * s.enclosed_integral(&geom, Weight::One);
    // Half-space analogue of the Minkowski identity with the position field.
    let integrand: Vec<f64> = (0..geom.len())
        .map(|i| {
            let p = s.nodes()[i];
            let nu = geom.normal[i];
            n * (1.0 - c * nu[1]) - geom.mean_curvature[i] * (p[0] * nu[0] + p[1] * nu[1])
        })
        .collect();
    let mink = surface_integral(&geom, &integrand);
    Ok(report(HkMode::Halfspace, &s, theta0, lhs, rhs, mink, None, started))
}

fn weaker_form(geom: &SurfaceGeometry, c: f64, n: f64, enclosed: f64) -> WeakerForm {
    let nz: Vec<f64> = geom.normal.iter().map(|nu| nu[1]).collect();
    let hnz: Vec<f64> = geom.normal.iter().zip(&geom.mean_curvature).map(|(nu, h)| h * nu[1]).collect();
    let z_over_h: Vec<f64> = geom.height.iter().zip(&geom.mean_curvature).map(|(z, h)| z / h).collect();
    let a = surface_integral(geom, &nz);
    let b = surface_integral(geom, &hnz);
    WeakerForm {
        lhs: surface_integral(geom, &z_over_h),
        rhs: (n + 1.0) / n * enclosed - c * a * a / b,
    }
}

fn ball_minkowski_residual(s: &DiscreteHypersurface, geom: &SurfaceGeometry, c: f64) -> f64 {
    let n = s.n() as f64;
    let integrand: Vec<f64> = (0..geom.len())
        .map(|i| {
            let x = conformal_field(&s.nodes()[i]);
            let nu = geom.normal[i];
            n * (geom.height[i] + c * nu[1]) - geom.mean_curvature[i] * (x[0] * nu[0] + x[1] * nu[1])
        })
        .collect();
    surface_integral(geom, &integrand)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinkowskiReport {
    pub residual: f64,
    /// `int n |x_{n+1}| dA`, a scale for the residual.
    pub scale: f64,
    /// Boundary contact angles are constant, the class the identity is stated for.
    pub in_scope: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// `int_Sigma n(x_{n+1} + cos theta0 <nu, E>) - H <X_{n+1}, nu>`; on closed
/// surfaces the `theta0` term is dropped.
pub fn minkowski_check(surface: &DiscreteHypersurface, theta0: f64) -> Result<MinkowskiReport> {
    let geom = surface.geometry()?;
    let closed = surface.support() == Support::Closed;
    if surface.support() == Support::HalfSpace {
        return Err(Error::InvalidParameter("the identity is stated for surfaces in the ball".into()));
    }
    let c = if closed { 0.0 } else { theta0.cos() };
    let residual = ball_minkowski_residual(surface, &geom, c);
    let abs_z: Vec<f64> = geom.height.iter().map(|z| surface.n() as f64 * z.abs()).collect();
    let scale = surface_integral(&geom, &abs_z);
    let angles: Vec<f64> = geom.contact_angles.iter().map(|a| a.theta).collect();
    let spread = angles.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - angles.iter().cloned().fold(f64::INFINITY, f64::min);
    let in_scope = closed || spread <= CONSTANT_ANGLE_TOL;
    Ok(MinkowskiReport {
        residual,
        scale,
        in_scope,
        warning: (!in_scope).then(|| {
            format!("contact angle varies by {spread:e}; the identity is only asserted for constant angle")
        }),
    })
}

/// Run `job` at every resolution concurrently, keeping the input order.
pub fn sweep<T, F>(resolutions: &[usize], job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    resolutions.par_iter().map(|&m| job(m)).collect()
}

/// Least-squares slope of `log(error)` against `log(1/resolution)`.
///
/// Errors at or below `floor` are converged to roundoff and dropped; `None`
/// when fewer than two points remain.
pub fn observed_order(points: &[(usize, f64)], floor: f64) -> Option<f64> {
    let data: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, e)| e.abs() > floor)
        .map(|&(m, e)| (-(m as f64).ln(), e.abs().ln()))
        .collect();
    if data.len() < 2 {
        return None;
    }
    let k = data.len() as f64;
    let mx = data.iter().map(|d| d.0).sum::<f64>() / k;
    let my = data.iter().map(|d| d.1).sum::<f64>() / k;
    let sxy: f64 = data.iter().map(|d| (d.0 - mx) * (d.1 - my)).sum();
    let sxx: f64 = data.iter().map(|d| (d.0 - mx) * (d.0 - mx)).sum();
    Some(sxy / sxx)
}

/// An order requirement is met if the observed order reaches `min_order`
/// or every error is already at roundoff.
pub fn order_at_least(points: &[(usize, f64)], floor: f64, min_order: f64) -> bool {
    observed_order(points, floor).map_or(true, |p| p >= min_order)
}
