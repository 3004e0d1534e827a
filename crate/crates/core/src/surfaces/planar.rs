//! Planar polyline utilities.

use std::collections::HashMap;

use super::spline::P2;

pub(crate) fn signed_area(loop_points: &[P2]) -> f64 {
    let n = loop_points.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = loop_points[i];
        let b = loop_points[(i + 1) % n];
        acc += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * acc
}

fn orient(a: P2, b: P2, c: P2) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: P2, b: P2, p: P2) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

/// Closed-segment intersection test.
pub(crate) fn segments_intersect(a: P2, b: P2, c: P2, d: P2) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// First pair `(i, j)`, `i < j`, of non-adjacent intersecting segments, where
/// segment `k` joins points `k` and `k + 1` (wrapping when `closed`).
/// Candidate pairs come from a uniform grid sized by the mean segment length.
pub(crate) fn find_self_intersection(points: &[P2], closed: bool) -> Option<(usize, usize)> {
    let n = points.len();
    let segments = if closed { n } else { n.saturating_sub(1) };
    if segments < 3 {
        return None;
    }
    let seg = |k: usize| (points[k], points[(k + 1) % n]);
    let mean: f64 = (0..segments)
        .map(|k| {
            let (a, b) = seg(k);
            (b[0] - a[0]).hypot(b[1] - a[1])
        })
        .sum::<f64>()
        / segments as f64;
    let cell = if mean > 0.0 { 2.0 * mean } else { 1.0 };
    let key = |x: f64| (x / cell).floor() as i64;
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for k in 0..segments {
        let (a, b) = seg(k);
        for gx in key(a[0].min(b[0]))..=key(a[0].max(b[0])) {
            for gy in key(a[1].min(b[1]))..=key(a[1].max(b[1])) {
                grid.entry((gx, gy)).or_default().push(k);
            }
        }
    }
    let adjacent = |i: usize, j: usize| j == i + 1 || (closed && i == 0 && j == segments - 1);
    let mut best: Option<(usize, usize)> = None;
    for bucket in grid.values() {
        for (p, &i) in bucket.iter().enumerate() {
            for &j in &bucket[p + 1..] {
                let (i, j) = if i < j { (i, j) } else { (j, i) };
                if i == j || adjacent(i, j) {
                    continue;
                }
                let (a, b) = seg(i);
                let (c, d) = seg(j);
                if segments_intersect(a, b, c, d) && best.map_or(true, |bp| (i, j) < bp) {
                    best = Some((i, j));
                }
            }
        }
    }
    best
}

/// Even-odd point-in-polygon test.
pub(crate) fn contains(polygon: &[P2], p: P2) -> bool {
    let n = polygon.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (polygon[i], polygon[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}
