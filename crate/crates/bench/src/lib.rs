//! Fixtures shared by the benchmarks.

use std::f64::consts::FRAC_PI_3;

use capillary_core::surfaces::cap;
use capillary_core::{CapKind, DiscreteHypersurface, SurfaceMode};

pub fn ball_cap(segments: usize) -> DiscreteHypersurface {
    cap(CapKind::BallCapillary, SurfaceMode::Axisymmetric, 2, FRAC_PI_3, 0.3, segments).expect("admissible cap")
}

pub fn halfspace_cap(segments: usize) -> DiscreteHypersurface {
    cap(CapKind::HalfspaceCapillary, SurfaceMode::Axisymmetric, 2, FRAC_PI_3, 1.0, segments).expect("admissible cap")
}
