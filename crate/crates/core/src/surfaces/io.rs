//! Plain-text surface files.
//!
//! ```text
//! axisymmetric-ball 2 1.0471975511965976 65
//! 0 0.5886...
//! ...
//! ```
//!
//! The header is `mode n theta0 node_count`, followed by one `x z` (curves)
//! or `r z` (profiles) pair per line. Blank lines and `#` comments are skipped.

use std::io::{BufRead, Write};

use super::{DiscreteHypersurface, Support, SurfaceMode, P2};
use crate::error::{Error, Result};

fn mode_token(mode: SurfaceMode, support: Support) -> &'static str {
    match (mode, support) {
        (SurfaceMode::Curve2d, Support::Ball) => "curve2d-ball",
        (SurfaceMode::Curve2d, Support::HalfSpace) => "curve2d-halfspace",
        (SurfaceMode::Curve2d, Support::Closed) => "curve2d-closed",
        (SurfaceMode::Axisymmetric, Support::Ball) => "axisymmetric-ball",
        (SurfaceMode::Axisymmetric, Support::HalfSpace) => "axisymmetric-halfspace",
        (SurfaceMode::Axisymmetric, Support::Closed) => "axisymmetric-closed",
    }
}

fn parse_mode(token: &str) -> Option<(SurfaceMode, Support)> {
    let (mode, support) = token.split_once('-')?;
    let mode = match mode {
        "curve2d" => SurfaceMode::Curve2d,
        "axisymmetric" => SurfaceMode::Axisymmetric,
        _ => return None,
    };
    let support = match support {
        "ball" => Support::Ball,
        "halfspace" => Support::HalfSpace,
        "closed" => Support::Closed,
        _ => return None,
    };
    Some((mode, support))
}

pub fn write_surface<W: Write>(s: &DiscreteHypersurface, mut out: W) -> std::io::Result<()> {
    write_nodes(&mut out, s.mode(), s.support(), s.n(), s.theta0(), s.nodes())
}

pub(crate) fn write_nodes<W: Write>(
    out: &mut W,
    mode: SurfaceMode,
    support: Support,
    n: usize,
    theta0: f64,
    nodes: &[P2],
) -> std::io::Result<()> {
    writeln!(out, "{} {} {:?} {}", mode_token(mode, support), n, theta0, nodes.len())?;
    for p in nodes {
        writeln!(out, "{:?} {:?}", p[0], p[1])?;
    }
    Ok(())
}

/// Parse and validate a surface; every invariant of [`DiscreteHypersurface::new`] is enforced.
pub fn read_surface<R: BufRead>(input: R) -> Result<DiscreteHypersurface> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty() && !s.trim_start().starts_with('#')));
    let parse_err = |line: usize, message: String| Error::Parse { line, message };
    let (line_no, header) = lines.next().ok_or_else(|| parse_err(1, "missing header".into()))?;
    let header = header?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(parse_err(line_no, "header must be `mode n theta0 node_count`".into()));
    }
    let (mode, support) = parse_mode(fields[0]).ok_or_else(|| parse_err(line_no, format!("unknown mode `{}`", fields[0])))?;
    let n: usize = fields[1].parse().map_err(|_| parse_err(line_no, format!("bad n `{}`", fields[1])))?;
    let theta0: f64 = fields[2].parse().map_err(|_| parse_err(line_no, format!("bad theta0 `{}`", fields[2])))?;
    let count: usize = fields[3]
        .parse()
        .map_err(|_| parse_err(line_no, format!("bad node count `{}`", fields[3])))?;
    let mut nodes = Vec::with_capacity(count);
    for (line_no, line) in lines {
        let line = line?;
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(line_no, format!("bad coordinate: {e}")))?;
        if values.len() != 2 {
            return Err(parse_err(line_no, format!("expected 2 coordinates, got {}", values.len())));
        }
        nodes.push([values[0], values[1]]);
    }
    if nodes.len() != count {
        return Err(parse_err(
            line_no,
            format!("header announces {count} nodes, file has {}", nodes.len()),
        ));
    }
    DiscreteHypersurface::new(mode, support, n, theta0, nodes)
}
