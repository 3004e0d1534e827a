//! Vector-valued cubic interpolating splines in Hermite form.

use nalgebra::{DMatrix, DVector};

/// A point or vector of the plane.
pub type P2 = [f64; 2];

#[derive(Debug, Clone, Copy)]
pub(crate) enum EndCondition {
    NotAKnot,
    /// Prescribed first derivative.
    Clamped(P2),
}

#[derive(Debug, Clone)]
pub(crate) struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<P2>,
    slopes: Vec<P2>,
}

impl CubicSpline {
    /// Interpolate `values` at strictly increasing `knots` (at least four).
    pub(crate) fn new(knots: Vec<f64>, values: Vec<P2>, start: EndCondition, end: EndCondition) -> Self {
        let n = knots.len();
        debug_assert!(n >= 4 && values.len() == n);
        let dx: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let secant: Vec<P2> = (0..n - 1)
            .map(|i| {
                [
                    (values[i + 1][0] - values[i][0]) / dx[i],
                    (values[i + 1][1] - values[i][1]) / dx[i],
                ]
            })
            .collect();
        // Row i: lower[i] s_{i-1} + diag[i] s_i + upper[i] s_{i+1} = rhs[i].
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut rhs = vec![[0.0; 2]; n];
        for i in 1..n - 1 {
            lower[i] = dx[i];
            diag[i] = 2.0 * (dx[i - 1] + dx[i]);
            upper[i] = dx[i - 1];
            for k in 0..2 {
                rhs[i][k] = 3.0 * (dx[i] * secant[i - 1][k] + dx[i - 1] * secant[i][k]);
            }
        }
        match start {
            EndCondition::Clamped(s) => {
                diag[0] = 1.0;
                rhs[0] = s;
            }
            EndCondition::NotAKnot => {
                let d = knots[2] - knots[0];
                diag[0] = dx[1];
                upper[0] = d;
                for k in 0..2 {
                    rhs[0][k] = ((dx[0] + 2.0 * d) * dx[1] * secant[0][k] + dx[0] * dx[0] * secant[1][k]) / d;
                }
            }
        }
        match end {
            EndCondition::Clamped(s) => {
                diag[n - 1] = 1.0;
                rhs[n - 1] = s;
            }
            EndCondition::NotAKnot => {
                let d = knots[n - 1] - knots[n - 3];
                diag[n - 1] = dx[n - 3];
                lower[n - 1] = d;
                for k in 0..2 {
                    rhs[n - 1][k] = (dx[n - 2] * dx[n - 2] * secant[n - 3][k]
                        + (2.0 * d + dx[n - 2]) * dx[n - 3] * secant[n - 2][k])
                        / d;
                }
            }
        }
        let slopes = solve_tridiagonal(&lower[1..], &diag, &upper[..n - 1], rhs);
        CubicSpline { knots, values, slopes }
    }

    /// First and second derivatives at knot `i`.
    pub(crate) fn derivatives_at_knot(&self, i: usize) -> (P2, P2) {
        let n = self.knots.len();
        let d1 = self.slopes[i];
        let (j, left) = if i + 1 < n { (i, true) } else { (i - 1, false) };
        let h = self.knots[j + 1] - self.knots[j];
        let mut d2 = [0.0; 2];
        for k in 0..2 {
            let m = (self.values[j + 1][k] - self.values[j][k]) / h;
            d2[k] = if left {
                (6.0 * m - 4.0 * self.slopes[j][k] - 2.0 * self.slopes[j + 1][k]) / h
            } else {
                (-6.0 * m + 2.0 * self.slopes[j][k] + 4.0 * self.slopes[j + 1][k]) / h
            };
        }
        (d1, d2)
    }
}

/// Tridiagonal solve with partial pivoting (the LAPACK `gtsv` scheme).
/// `sub[i]` is A(i+1, i), `sup[i]` is A(i, i+1).
pub(crate) fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], mut b: Vec<P2>) -> Vec<P2> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut du = sup.to_vec();
    let mut dl = sub.to_vec();
    // dl is reused for the second superdiagonal created by interchanges.
    for i in 0..n.saturating_sub(1) {
        if d[i].abs() >= dl[i].abs() {
            let fact = dl[i] / d[i];
            d[i + 1] -= fact * du[i];
            for k in 0..2 {
                b[i + 1][k] -= fact * b[i][k];
            }
            dl[i] = 0.0;
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i + 2 < n {
                dl[i] = du[i + 1];
                du[i + 1] = -fact * dl[i];
            } else {
                dl[i] = 0.0;
            }
            du[i] = temp;
            let bi = b[i];
            b[i] = b[i + 1];
            for k in 0..2 {
                b[i + 1][k] = bi[k] - fact * b[i + 1][k];
            }
        }
    }
    for k in 0..2 {
        b[n - 1][k] /= d[n - 1];
    }
    if n > 1 {
        for k in 0..2 {
            b[n - 2][k] = (b[n - 2][k] - du[n - 2] * b[n - 1][k]) / d[n - 2];
        }
    }
    for i in (0..n.saturating_sub(2)).rev() {
        for k in 0..2 {
            b[i][k] = (b[i][k] - du[i] * b[i + 1][k] - dl[i] * b[i + 2][k]) / d[i];
        }
    }
    b
}

/// Derivative at `knots[last]` of the interpolating polynomial through the
/// given points (degree = points - 1).
pub(crate) fn polynomial_end_slope(knots: &[f64], values: &[P2]) -> P2 {
    let m = knots.len();
    let origin = knots[m - 1];
    let vander = DMatrix::from_fn(m, m, |i, j| (knots[i] - origin).powi(j as i32));
    let lu = vander.lu();
    let mut out = [0.0; 2];
    for (k, slot) in out.iter_mut().enumerate() {
        let rhs = DVector::from_fn(m, |i, _| values[i][k]);
        let coef = lu.solve(&rhs).expect("distinct knots give a regular Vandermonde matrix");
        *slot = coef[1];
    }
    out
}
