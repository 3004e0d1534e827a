//! Riemannian base metrics, Zermelo navigation data and the Randers gauge
//! they induce.
//!
//! Every metric handled here is diagonal in the standard frame with a
//! horizontal coefficient `A(x_{n+1})` on `dx_1^2 + ... + dx_n^2` and a
//! vertical coefficient `B(x_{n+1})` on `dx_{n+1}^2`:
//!
//! | metric          | `A`                      | `B`                          |
//! |-----------------|--------------------------|------------------------------|
//! | Euclidean       | `1`                      | `1`                          |
//! | Hyperbolic      | `z^-2`                   | `z^-2`                       |
//! | DiagonalAlpha   | `1 / (z^2 - c^2)`        | `z^2 / (z^2 - c^2)^2`        |
//!
//! with `z = x_{n+1}` and `c = cos(theta0)`. The last one is the Riemannian
//! part of the Randers metric generated by `(x_{n+1}^{-2} delta, c E_{n+1})`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
/// Covectors share the coordinate representation of vectors; the pairing is
/// the plain dot product.
pub type Covector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Points with `1 - |v0|_g^2` below this margin are rejected.
pub const WIND_MARGIN: f64 = 1e-10;

const NEWTON_MAX_ITER: usize = 100;
const DUAL_SAMPLE_DIRECTIONS: usize = 64;
const LOCAL_NEWTON: f64 = 1e-6;

/// A point of `R^{n+1}`; the last coordinate is the height `x_{n+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientPoint {
    coords: Vector,
}

impl AmbientPoint {
    pub fn new(coords: Vector) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "ambient dimension must be at least 2, got {}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coordinate".into()));
        }
        Ok(AmbientPoint { coords })
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(Vector::from_column_slice(coords))
    }

    /// Point `(0, ..., 0, height)` in `R^{n+1}`.
    pub fn on_axis(n: usize, height: f64) -> Result<Self> {
        let mut coords = Vector::zeros(n + 1);
        coords[n] = height;
        Self::new(coords)
    }

    /// Ambient dimension `n + 1`.
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Hypersurface dimension `n`.
    pub fn n(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn height(&self) -> f64 {
        self.coords[self.coords.len() - 1]
    }

    pub fn coords(&self) -> &Vector {
        &self.coords
    }

    pub fn into_coords(self) -> Vector {
        self.coords
    }
}

/// `k`-th standard basis vector of `R^dim`.
pub fn basis(dim: usize, k: usize) -> Vector {
    let mut e = Vector::zeros(dim);
    e[k] = 1.0;
    e
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricSpec {
    Euclidean,
    /// Poincare half-space metric `x_{n+1}^{-2} delta`.
    Hyperbolic,
    /// `A sum dx_i^2 + B dx_{n+1}^2` with `A = 1/l`, `B = z^2/l^2`,
    /// `l = z^2 - cos^2(theta0)`.
    DiagonalAlpha { cos_theta0: f64 },
}

impl MetricSpec {
    pub fn alpha(theta0: f64) -> Self {
        MetricSpec::DiagonalAlpha {
            cos_theta0: theta0.cos(),
        }
    }

    /// Lower bound on the height for points in the domain.
    pub fn height_bound(&self) -> Option<f64> {
        match self {
            MetricSpec::Euclidean => None,
            MetricSpec::Hyperbolic => Some(0.0),
            MetricSpec::DiagonalAlpha { cos_theta0 } => Some(cos_theta0.abs()),
        }
    }

    pub fn check_height(&self, height: f64) -> Result<()> {
        match *self {
            MetricSpec::Euclidean => Ok(()),
            MetricSpec::Hyperbolic => {
                if height > 0.0 {
                    Ok(())
                } else {
                    Err(Error::DomainViolation { height, bound: 0.0 })
                }
            }
            MetricSpec::DiagonalAlpha { cos_theta0 } => {
                let c2 = cos_theta0 * cos_theta0;
                let ell = height * height - c2;
                if height > 0.0 && ell > WIND_MARGIN * height * height {
                    Ok(())
                } else {
                    Err(Error::DomainViolation {
                        height,
                        bound: cos_theta0.abs(),
                    })
                }
            }
        }
    }

    /// Horizontal and vertical coefficients `(A, B)` at the given height.
    pub fn coefficients(&self, height: f64) -> Result<(f64, f64)> {
        self.check_height(height)?;
        Ok(self.coefficients_unchecked(height))
    }

    pub(crate) fn coefficients_unchecked(&self, z: f64) -> (f64, f64) {
        match *self {
            MetricSpec::Euclidean => (1.0, 1.0),
            MetricSpec::Hyperbolic => {
                let a = 1.0 / (z * z);
                (a, a)
            }
            MetricSpec::DiagonalAlpha { cos_theta0 } => {
                let ell = z * z - cos_theta0 * cos_theta0;
                (1.0 / ell, z * z / (ell * ell))
            }
        }
    }

    /// Height derivatives `(dA/dz, dB/dz)`.
    pub(crate) fn coefficient_derivatives_unchecked(&self, z: f64) -> (f64, f64) {
        match *self {
            MetricSpec::Euclidean => (0.0, 0.0),
            MetricSpec::Hyperbolic => {
                let d = -2.0 / (z * z * z);
                (d, d)
            }
            MetricSpec::DiagonalAlpha { cos_theta0 } => {
                let ell = z * z - cos_theta0 * cos_theta0;
                let da = -2.0 * z / (ell * ell);
                let db = 2.0 * z / (ell * ell) - 4.0 * z * z * z / (ell * ell * ell);
                (da, db)
            }
        }
    }

    pub fn matrix(&self, x: &AmbientPoint) -> Result<Matrix> {
        let (a, b) = self.coefficients(x.height())?;
        let dim = x.dim();
        let mut m = Matrix::from_diagonal_element(dim, dim, a);
        m[(dim - 1, dim - 1)] = b;
        Ok(m)
    }

    /// `g_x(u, v)`.
    pub fn eval(&self, x: &AmbientPoint, u: &Vector, v: &Vector) -> Result<f64> {
        check_dim(x, u)?;
        check_dim(x, v)?;
        let (a, b) = self.coefficients(x.height())?;
        let last = x.dim() - 1;
        let horizontal: f64 = (0..last).map(|i| u[i] * v[i]).sum();
        Ok(a * horizontal + b * u[last] * v[last])
    }

    pub fn norm(&self, x: &AmbientPoint, u: &Vector) -> Result<f64> {
        Ok(self.eval(x, u, u)?.sqrt())
    }
}

fn check_dim(x: &AmbientPoint, v: &Vector) -> Result<()> {
    if v.len() != x.dim() {
        return Err(Error::Dimension {
            expected: x.dim(),
            got: v.len(),
        });
    }
    Ok(())
}

/// The parts of a Randers gauge value `F = sqrt(alpha(xi, xi)) + beta(xi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeValue {
    pub f: f64,
    /// `alpha_x(xi, xi)`, before the square root.
    pub alpha_part: f64,
    pub beta_part: f64,
}

/// Which geometric setting a navigation datum belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    /// Hyperbolic sea, wind `cos(theta0) E_{n+1}`; capillary problems in the unit ball.
    Ball,
    /// Euclidean sea, wind `-cos(theta0) E_{n+1}`; capillary problems in the half-space.
    HalfSpace,
}

/// Zermelo navigation data `(g, v0)` with a constant wind.
#[derive(Debug, Clone, PartialEq)]
pub struct NavigationData {
    base: MetricSpec,
    wind: Vector,
    theta0: f64,
}

impl NavigationData {
    pub fn new(base: MetricSpec, wind: Vector, theta0: f64) -> Result<Self> {
        if wind.len() < 2 {
            return Err(Error::InvalidParameter("wind must live in R^{n+1}, n >= 1".into()));
        }
        if !(theta0 > 0.0 && theta0 < std::f64::consts::PI) {
            return Err(Error::InvalidParameter(format!(
                "theta0 = {theta0} is outside (0, pi)"
            )));
        }
        Ok(NavigationData { base, wind, theta0 })
    }

    /// `(x_{n+1}^{-2} delta, cos(theta0) E_{n+1})` on `R^{n+1}`.
    pub fn ball(theta0: f64, n: usize) -> Result<Self> {
        let dim = n + 1;
        Self::new(MetricSpec::Hyperbolic, basis(dim, n) * theta0.cos(), theta0)
    }

    /// `(delta, -cos(theta0) E_{n+1})` on `R^{n+1}`; a Minkowski norm.
    pub fn halfspace(theta0: f64, n: usize) -> Result<Self> {
        let dim = n + 1;
        Self::new(MetricSpec::Euclidean, basis(dim, n) * -theta0.cos(), theta0)
    }

    pub fn for_setting(setting: Setting, theta0: f64, n: usize) -> Result<Self> {
        match setting {
            Setting::Ball => Self::ball(theta0, n),
            Setting::HalfSpace => Self::halfspace(theta0, n),
        }
    }

    pub fn base(&self) -> MetricSpec {
        self.base
    }

    pub fn wind(&self) -> &Vector {
        &self.wind
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    pub fn dim(&self) -> usize {
        self.wind.len()
    }

    fn check_point(&self, x: &AmbientPoint) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: x.dim(),
            });
        }
        Ok(())
    }

    /// `lambda = 1 - |v0|_g^2`, rejected below [`WIND_MARGIN`].
    pub fn lambda(&self, x: &AmbientPoint) -> Result<f64> {
        self.check_point(x)?;
        let w2 = self.base.eval(x, &self.wind, &self.wind)?;
        let lambda = 1.0 - w2;
        if lambda < WIND_MARGIN {
            return Err(Error::WindCondition { margin: lambda });
        }
        Ok(lambda)
    }

    /// Riemannian part `alpha_x` of the Randers decomposition.
    pub fn alpha_matrix(&self, x: &AmbientPoint) -> Result<Matrix> {
        let lambda = self.lambda(x)?;
        let g = self.base.matrix(x)?;
        let gv = &g * &self.wind;
        Ok(g / lambda + &gv * gv.transpose() / (lambda * lambda))
    }

    /// The 1-form `beta_x = g_x(., v0) / lambda`.
    pub fn beta(&self, x: &AmbientPoint) -> Result<Covector> {
        let lambda = self.lambda(x)?;
        let g = self.base.matrix(x)?;
        Ok(&g * &self.wind / lambda)
    }

    /// `F(x, xi)` with its `alpha` and `beta` parts.
    pub fn randers_eval(&self, x: &AmbientPoint, xi: &Vector) -> Result<GaugeValue> {
        check_dim(x, xi)?;
        if xi.iter().all(|&c| c == 0.0) {
            return Err(Error::ZeroVector);
        }
        let alpha = self.alpha_matrix(x)?;
        let beta = self.beta(x)?;
        Ok(gauge_from_parts(&alpha, &beta, xi))
    }

    /// Residual of the navigation identity `|xi/F + v0|_g - 1`.
    pub fn navigation_residual(&self, x: &AmbientPoint, xi: &Vector) -> Result<f64> {
        let f = self.randers_eval(x, xi)?.f;
        let shifted = xi / f + &self.wind;
        Ok(self.base.norm(x, &shifted)? - 1.0)
    }

    /// Hessian of `F^2 / 2` in the fiber variable, assembled in closed form
    /// from `alpha` and `beta`.
    pub fn fundamental_tensor(&self, x: &AmbientPoint, xi: &Vector) -> Result<Matrix> {
        check_dim(x, xi)?;
        if xi.iter().all(|&c| c == 0.0) {
            return Err(Error::ZeroVector);
        }
        let alpha = self.alpha_matrix(x)?;
        let beta = self.beta(x)?;
        Ok(fundamental_from_parts(&alpha, &beta, xi))
    }

    /// Legendre transform `l_x(xi) = D(F^2/2)(xi)`.
    pub fn legendre(&self, x: &AmbientPoint, xi: &Vector) -> Result<Covector> {
        check_dim(x, xi)?;
        if xi.iter().all(|&c| c == 0.0) {
            return Err(Error::ZeroVector);
        }
        let alpha = self.alpha_matrix(x)?;
        let beta = self.beta(x)?;
        Ok(legendre_from_parts(&alpha, &beta, xi))
    }

    /// Dual gauge `F*_x(w) = sup { w(xi) : F(x, xi) <= 1 }`.
    ///
    /// The `F`-unit ball is the `g`-unit ball translated by `-v0`, so the
    /// support function is `|w|_{g*} - w(v0)`.
    pub fn dual_gauge(&self, x: &AmbientPoint, w: &Covector) -> Result<f64> {
        check_dim(x, w)?;
        if w.iter().all(|&c| c == 0.0) {
            return Err(Error::ZeroVector);
        }
        self.lambda(x)?;
        let (a, b) = self.base.coefficients(x.height())?;
        let last = x.dim() - 1;
        let horizontal: f64 = (0..last).map(|i| w[i] * w[i]).sum();
        let dual_norm = (horizontal / a + w[last] * w[last] / b).sqrt();
        Ok(dual_norm - w.dot(&self.wind))
    }

    /// Inverse Legendre transform `l*_x(w)`, by damped Newton on the strictly
    /// convex potential `F^2/2 - w(.)`.
    pub fn legendre_dual(&self, x: &AmbientPoint, w: &Covector) -> Result<Vector> {
        check_dim(x, w)?;
        if w.iter().all(|&c| c == 0.0) {
            return Err(Error::ZeroVector);
        }
        let alpha = self.alpha_matrix(x)?;
        let beta = self.beta(x)?;
        let gauge = |xi: &Vector| gauge_from_parts(&alpha, &beta, xi).f;

        // F* estimated on a sampled F-unit sphere.
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_d0a1);
        let dim = w.len();
        let mut dual_estimate = f64::NEG_INFINITY;
        for _ in 0..DUAL_SAMPLE_DIRECTIONS {
            let u = Vector::from_fn(dim, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
            if u.norm() < 1e-8 {
                continue;
            }
            dual_estimate = dual_estimate.max(w.dot(&u) / gauge(&u));
        }
        let sharp = alpha
            .clone()
            .lu()
            .solve(w)
            .ok_or(Error::NonConvergence { iterations: 0, residual: f64::NAN })?;
        let mut xi = if dual_estimate > 0.0 {
            &sharp * (dual_estimate / gauge(&sharp))
        } else {
            sharp
        };

        let potential = |xi: &Vector| {
            let f = gauge(xi);
            0.5 * f * f - w.dot(xi)
        };
        let scale = w.norm().max(f64::MIN_POSITIVE);
        let mut residual = f64::INFINITY;
        for _ in 0..NEWTON_MAX_ITER {
            let grad = legendre_from_parts(&alpha, &beta, &xi) - w;
            residual = grad.norm() / scale;
            if residual <= 1e-14 {
                return Ok(xi);
            }
            let hess = fundamental_from_parts(&alpha, &beta, &xi);
            let step = match hess.lu().solve(&(-&grad)) {
                Some(s) => s,
                None => break,
            };
            if residual < LOCAL_NEWTON {
                // Inside the quadratic basin the potential no longer resolves
                // descent at roundoff; take full steps.
                let trial = &xi + &step;
                let next = (legendre_from_parts(&alpha, &beta, &trial) - w).norm() / scale;
                if next >= residual {
                    break;
                }
                xi = trial;
                continue;
            }
            let slope = grad.dot(&step);
            let current = potential(&xi);
            let mut t = 1.0;
            loop {
                let trial = &xi + &step * t;
                if trial.iter().any(|c| *c != 0.0) && potential(&trial) <= current + 1e-4 * t * slope {
                    xi = trial;
                    break;
                }
                t *= 0.5;
                if t < 1e-12 {
                    // Line search stalled at round-off level; accept if close enough.
                    return if residual <= 1e-11 {
                        Ok(xi)
                    } else {
                        Err(Error::NonConvergence {
                            iterations: NEWTON_MAX_ITER,
                            residual,
                        })
                    };
                }
            }
        }
        if residual <= 1e-11 {
            return Ok(xi);
        }
        Err(Error::NonConvergence {
            iterations: NEWTON_MAX_ITER,
            residual,
        })
    }

    /// `F`-unit normal `n_F = n_g - v0`, where `n_g` is the `g`-unit vector
    /// along the Euclidean unit normal `n_delta`.
    pub fn finsler_normal(&self, x: &AmbientPoint, n_delta: &Vector) -> Result<Vector> {
        check_dim(x, n_delta)?;
        let euclid = n_delta.norm();
        if (euclid - 1.0).abs() > 1e-10 {
            return Err(Error::NotUnit { norm: euclid });
        }
        self.lambda(x)?;
        let g_norm = self.base.norm(x, n_delta)?;
        Ok(n_delta / g_norm - &self.wind)
    }

    /// `(V)^{flat_g} = g(V, .)`.
    pub fn lower_index(&self, x: &AmbientPoint, v: &Vector) -> Result<Covector> {
        check_dim(x, v)?;
        Ok(self.base.matrix(x)? * v)
    }
}

pub(crate) fn gauge_from_parts(alpha: &Matrix, beta: &Covector, xi: &Vector) -> GaugeValue {
    let alpha_part = (alpha * xi).dot(xi);
    let beta_part = beta.dot(xi);
    GaugeValue {
        f: alpha_part.sqrt() + beta_part,
        alpha_part,
        beta_part,
    }
}

fn legendre_from_parts(alpha: &Matrix, beta: &Covector, xi: &Vector) -> Covector {
    let ax = alpha * xi;
    let a = ax.dot(xi).sqrt();
    let f = a + beta.dot(xi);
    (ax / a + beta) * f
}

fn fundamental_from_parts(alpha: &Matrix, beta: &Covector, xi: &Vector) -> Matrix {
    let ax = alpha * xi;
    let a = ax.dot(xi).sqrt();
    let f = a + beta.dot(xi);
    let ell = ax / a;
    let shifted = &ell + beta;
    (alpha - &ell * ell.transpose()) * (f / a) + &shifted * shifted.transpose()
}
