use std::f64::consts::FRAC_PI_3;
use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::str::FromStr;

use capillary_core::surfaces::{cap, perturb, read_surface};
use capillary_core::{CapKind, DiscreteHypersurface, FlowMode, Perturbation, Support, SurfaceMode};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Serialize, Serializer};

use crate::CliError;

#[derive(Parser, Debug)]
#[command(name = "capillary", version, about = "Heintze-Karcher checks for capillary hypersurfaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Inequality in the half-ball with the conformal weight.
    VerifyBall(VerifyArgs),
    /// Inequality in the half-space.
    VerifyHalfspace(VerifyArgs),
    /// Run a geodesic normal flow and track Q + (n+1)/n V.
    Flow(FlowArgs),
    /// Integrate an F-geodesic.
    Geodesic(GeodesicArgs),
    /// Sectional curvatures of the Riemannian part alpha.
    Curvature(CurvatureArgs),
    /// Refinement sweep with observed convergence orders.
    Convergence(ConvergenceArgs),
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::VerifyBall(a) | Command::VerifyHalfspace(a) => &a.common,
            Command::Flow(a) => &a.common,
            Command::Geodesic(a) => &a.common,
            Command::Curvature(a) => &a.common,
            Command::Convergence(a) => &a.common,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    Ball,
    Halfspace,
}

impl Setting {
    pub fn support(self) -> Support {
        match self {
            Setting::Ball => Support::Ball,
            Setting::Halfspace => Support::HalfSpace,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceArg {
    Cap,
    Perturbed,
    File(PathBuf),
}

impl FromStr for SurfaceArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cap" => Ok(SurfaceArg::Cap),
            "perturbed" => Ok(SurfaceArg::Perturbed),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(SurfaceArg::File(PathBuf::from(p))),
                _ => Err(format!("expected cap, perturbed or file:<path>, got `{s}`")),
            },
        }
    }
}

impl fmt::Display for SurfaceArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SurfaceArg::Cap => write!(f, "cap"),
            SurfaceArg::Perturbed => write!(f, "perturbed"),
            SurfaceArg::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl Serialize for SurfaceArg {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    /// Contact angle in radians.
    #[arg(long, default_value_t = FRAC_PI_3)]
    pub theta0: f64,
    /// Hypersurface dimension; 1 selects planar curves.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Segments along the generated profile or curve.
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Flow time step (default: chosen from the initial front).
    #[arg(long)]
    pub dt: Option<f64>,
    /// cap, perturbed or file:<path>.
    #[arg(long, default_value = "cap")]
    pub surface: SurfaceArg,
    /// Seed for perturbations and sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Radius of the sphere carrying a generated cap (default 0.3 in the ball, 1 in the half-space).
    #[arg(long)]
    pub radius: Option<f64>,
    /// Largest normal displacement of `--surface perturbed`.
    #[arg(long, default_value_t = 2e-3)]
    pub amplitude: f64,
}

pub const DEFAULT_RESOLUTION: usize = 256;

impl Common {
    pub fn resolution(&self) -> usize {
        self.resolution.unwrap_or(DEFAULT_RESOLUTION)
    }

    pub fn radius(&self, setting: Setting) -> f64 {
        self.radius.unwrap_or(match setting {
            Setting::Ball => 0.3,
            Setting::Halfspace => 1.0,
        })
    }

    pub fn is_cap(&self) -> bool {
        self.surface == SurfaceArg::Cap
    }

    /// Generated or loaded surface at the given resolution.
    pub fn surface(&self, setting: Setting, resolution: usize) -> Result<DiscreteHypersurface, CliError> {
        let generated = || {
            let kind = match setting {
                Setting::Ball => CapKind::BallCapillary,
                Setting::Halfspace => CapKind::HalfspaceCapillary,
            };
            let mode = if self.n == 1 { SurfaceMode::Curve2d } else { SurfaceMode::Axisymmetric };
            cap(kind, mode, self.n, self.theta0, self.radius(setting), resolution)
        };
        let s = match &self.surface {
            SurfaceArg::Cap => generated()?,
            SurfaceArg::Perturbed => perturb(
                &generated()?,
                Perturbation { amplitude: self.amplitude, frequency: 2, seed: self.seed },
            )?,
            SurfaceArg::File(path) => {
                let file = File::open(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
                read_surface(BufReader::new(file))?
            }
        };
        if s.support() != setting.support() {
            return Err(CliError::Invalid(format!(
                "surface has {:?} support, this command needs {:?}",
                s.support(),
                setting.support()
            )));
        }
        Ok(s)
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Flow horizon used for the monotonicity check.
    #[arg(long, default_value_t = 10.0)]
    pub t_max: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct FlowArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = FlowModeArg::CapillaryBall)]
    pub mode: FlowModeArg,
    #[arg(long, default_value_t = 10.0)]
    pub t_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowModeArg {
    FreeBoundary,
    CapillaryBall,
    CapillaryHalfspace,
}

impl FlowModeArg {
    pub fn mode(self) -> FlowMode {
        match self {
            FlowModeArg::FreeBoundary => FlowMode::FreeBoundaryBall,
            FlowModeArg::CapillaryBall => FlowMode::CapillaryBall,
            FlowModeArg::CapillaryHalfspace => FlowMode::CapillaryHalfspace,
        }
    }

    pub fn setting(self) -> Setting {
        match self {
            FlowModeArg::CapillaryHalfspace => Setting::Halfspace,
            _ => Setting::Ball,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GeodesicArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = Setting::Ball)]
    pub setting: Setting,
    /// Start point, comma separated (default: on the axis, one unit above the domain bound).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    /// Initial direction, normalized to F-length one.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
    /// F-length of the path.
    #[arg(long, default_value_t = 1.0)]
    pub length: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CurvatureArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = Setting::Ball)]
    pub setting: Setting,
}
