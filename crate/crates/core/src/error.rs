use std::fmt;

use thiserror::Error;

/// Named hypothesis of the capillary Heintze-Karcher setting.
///
/// The inequalities are conditional; every check that refuses an input says
/// which of these failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hypothesis {
    /// `H > 0` at every node.
    MeanConvexity,
    /// Contact angle `theta(x) <= theta0` on the boundary.
    ContactAngle,
    /// Ball mode: `x_{n+1} > |cos theta0|`; half-space mode: `x_{n+1} >= 0`.
    Domain,
    /// No self-intersections among segments.
    Embeddedness,
    /// Boundary nodes lie on the support.
    SupportContact,
    /// The boundary meets the support transversally (`0 < theta < pi`).
    Transversality,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Hypothesis::MeanConvexity => "mean-convexity",
            Hypothesis::ContactAngle => "angle",
            Hypothesis::Domain => "domain",
            Hypothesis::Embeddedness => "embeddedness",
            Hypothesis::SupportContact => "support-contact",
            Hypothesis::Transversality => "transversality",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("point outside the metric domain: height {height} must exceed {bound}")]
    DomainViolation { height: f64, bound: f64 },

    #[error("wind condition violated: 1 - |v0|_g^2 = {margin:e}")]
    WindCondition { margin: f64 },

    #[error("zero vector where a nonzero vector is required")]
    ZeroVector,

    #[error("expected a unit vector, got norm {norm}")]
    NotUnit { norm: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("iteration did not converge after {iterations} steps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("path left the metric domain at t = {time}")]
    DomainExit { time: f64 },

    #[error("step size underflow ({step:e})")]
    StepUnderflow { step: f64 },

    #[error("degenerate plane ({0}, {1})")]
    DegeneratePlane(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("hypothesis violated ({hypothesis}): {detail}")]
    Hypothesis { hypothesis: Hypothesis, detail: String },

    #[error("duplicate node at index {0}")]
    DuplicateNode(usize),

    #[error("too few nodes: {count} (need at least {min})")]
    TooFewNodes { count: usize, min: usize },

    #[error("boundary cycle is not closed; enclosed region undefined")]
    OpenBoundary,

    #[error("flow exhausted at t = {t}: every node has been excised")]
    FlowExhausted { t: f64 },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn hypothesis(hypothesis: Hypothesis, detail: impl Into<String>) -> Self {
        Error::Hypothesis {
            hypothesis,
            detail: detail.into(),
        }
    }

    /// The violated hypothesis, if this error is a hypothesis failure.
    pub fn violated(&self) -> Option<Hypothesis> {
        match self {
            Error::Hypothesis { hypothesis, .. } => Some(*hypothesis),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
