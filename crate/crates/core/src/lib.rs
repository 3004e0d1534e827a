//! Randers navigation metrics, geodesic normal flows and Heintze-Karcher
//! checks for capillary hypersurfaces in the half-ball and the half-space.

pub mod error;
pub mod flows;
pub mod geodesics;
pub mod metrics;
pub mod surfaces;
pub mod verify;

pub use error::{Error, Hypothesis, Result};
pub use flows::{FlowMode, FlowRun, FlowState};
pub use metrics::{AmbientPoint, Covector, Matrix, MetricSpec, NavigationData, Setting, Vector};
pub use surfaces::{CapKind, DiscreteHypersurface, Perturbation, Support, SurfaceGeometry, SurfaceMode, P2};
pub use verify::{HKReport, HkMode, MinkowskiReport};
