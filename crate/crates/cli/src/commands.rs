use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use capillary_core::flows::{run_flow, FlowRun, TOLERANCE_FACTOR};
use capillary_core::geodesics::{exp_f_path, hyperbolic_geodesic, sectional_curvature, sphere_convexity};
use capillary_core::verify::{
    hk_ball, hk_halfspace, minkowski_check, observed_order, sweep, ConvergencePoint, EQUALITY_TOL, ROUNDOFF_FLOOR,
};
use capillary_core::{AmbientPoint, DiscreteHypersurface, FlowMode, HKReport, MetricSpec, NavigationData, Vector};
use serde_json::{json, Value};

use crate::args::{Common, ConvergenceArgs, CurvatureArgs, FlowArgs, GeodesicArgs, Setting, SurfaceArg, VerifyArgs};
use crate::{Check, CliError, Output};

const MIN_ORDER: f64 = 1.9;
const UNIT_SPEED_TOL: f64 = 1e-6;
const ORACLE_TOL: f64 = 1e-6;
const CURVATURE_AGREEMENT_TOL: f64 = 1e-4;
const COARSEST: usize = 64;

/// Relative tolerance for equality-case functionals at a given resolution.
fn discretization_tol(resolution: usize) -> f64 {
    EQUALITY_TOL.max(TOLERANCE_FACTOR * (PI / resolution as f64).powi(2))
}

fn hk(s: &DiscreteHypersurface, setting: Setting, theta0: f64) -> capillary_core::Result<HKReport> {
    match setting {
        Setting::Ball => hk_ball(s, theta0),
        Setting::Halfspace => hk_halfspace(s, theta0),
    }
}

fn flow_mode(setting: Setting) -> FlowMode {
    match setting {
        Setting::Ball => FlowMode::CapillaryBall,
        Setting::Halfspace => FlowMode::CapillaryHalfspace,
    }
}

fn report_csv(r: &HKReport) -> String {
    format!(
        "mode,theta0,n,resolution,lhs,rhs,deficit,minkowski_residual,monotonicity_violation,runtime_ms\n\
         {},{:?},{},{},{:?},{:?},{:?},{:?},{:?},{}\n",
        serde_json::to_value(r.mode).unwrap().as_str().unwrap_or_default(),
        r.theta0,
        r.n,
        r.resolution,
        r.lhs,
        r.rhs,
        r.deficit,
        r.minkowski_residual,
        r.monotonicity_violation,
        r.runtime_ms
    )
}

fn flow_summary(run: &FlowRun) -> Value {
    json!({
        "mode": run.mode,
        "dt": run.dt,
        "mesh_size": run.mesh_size,
        "tolerance": run.tolerance(),
        "steps": run.history.len() - 1,
        "first_focal_time": run.first_focal_time,
        "exhausted_at": run.exhausted_at,
        "monotonicity_violation": run.monotonicity_violation(),
        "equality_residual": run.equality_residual(),
    })
}

fn with_config<T: serde::Serialize>(config: &T, body: Value) -> Value {
    let mut v = json!({ "config": config });
    if let (Value::Object(target), Value::Object(extra)) = (&mut v, body) {
        target.extend(extra);
    }
    v
}

pub fn verify(a: &VerifyArgs, setting: Setting) -> Result<Output, CliError> {
    let c = &a.common;
    let s = c.surface(setting, c.resolution())?;
    let mut report = hk(&s, setting, c.theta0)?;
    let tol = discretization_tol(report.resolution);
    let mut checks = vec![Check::at_least("relative_deficit", report.relative_deficit(), -tol)];
    if c.is_cap() {
        checks.push(Check::at_most("equality", report.relative_deficit().abs(), tol));
    }
    let minkowski = match setting {
        Setting::Ball => {
            let m = minkowski_check(&s, c.theta0)?;
            if m.in_scope {
                checks.push(Check::at_most("minkowski", m.residual.abs() / m.scale, tol));
            }
            Some(m)
        }
        Setting::Halfspace => None,
    };
    let run = run_flow(&s, flow_mode(setting), c.dt, a.t_max)?;
    report.monotonicity_violation = run.monotonicity_violation();
    checks.push(Check::at_most("monotonicity", report.monotonicity_violation, run.tolerance()));

    let mut body = serde_json::to_value(&report).map_err(|e| CliError::Invalid(e.to_string()))?;
    if let Value::Object(map) = &mut body {
        if let Some(m) = minkowski {
            map.insert("minkowski".into(), json!(m));
        }
        map.insert("flow".into(), flow_summary(&run));
        map.insert("checks".into(), json!(checks));
    }
    Ok(Output {
        json: with_config(a, body),
        csv: report_csv(&report),
        checks,
    })
}

pub fn flow(a: &FlowArgs) -> Result<Output, CliError> {
    let c = &a.common;
    let setting = a.mode.setting();
    let s = c.surface(setting, c.resolution())?;
    let run = run_flow(&s, a.mode.mode(), c.dt, a.t_max)?;
    let tol = run.tolerance();
    let mut checks = vec![Check::at_most("monotonicity", run.monotonicity_violation(), tol)];
    if c.is_cap() {
        checks.push(Check::at_most("equality", run.equality_residual(), tol));
        if setting == Setting::Halfspace {
            if let Some(focal) = run.first_focal_time {
                checks.push(Check::at_most("focal_time", (focal - c.radius(setting)).abs(), run.dt));
            }
        }
    }
    let mut csv = Vec::new();
    run.write_csv(&mut csv)?;
    let body = json!({
        "summary": flow_summary(&run),
        "history": run.history,
        "checks": checks,
    });
    Ok(Output {
        json: with_config(a, body),
        csv: String::from_utf8(csv).expect("CSV is ASCII"),
        checks,
    })
}

pub fn geodesic(a: &GeodesicArgs) -> Result<Output, CliError> {
    let c = &a.common;
    let dim = c.n + 1;
    let nd = match a.setting {
        Setting::Ball => NavigationData::ball(c.theta0, c.n)?,
        Setting::Halfspace => NavigationData::halfspace(c.theta0, c.n)?,
    };
    let point = match &a.point {
        Some(p) => p.clone(),
        None => {
            let mut p = vec![0.0; dim];
            p[c.n] = match a.setting {
                Setting::Ball => c.theta0.cos().abs() + 1.0,
                Setting::Halfspace => 1.0,
            };
            p
        }
    };
    let direction = match &a.direction {
        Some(d) => d.clone(),
        None => {
            let mut d = vec![0.0; dim];
            d[0] = 1.0;
            d[c.n] = 0.5;
            d
        }
    };
    if point.len() != dim || direction.len() != dim {
        return Err(CliError::Invalid(format!("point and direction need {dim} coordinates for n = {}", c.n)));
    }
    let p = AmbientPoint::from_slice(&point)?;
    let dir = Vector::from_vec(direction);
    let zeta = &dir / nd.randers_eval(&p, &dir)?.f;
    let path = exp_f_path(&nd, &p, &zeta, a.length)?;

    let mut speed_err = 0.0f64;
    for s in &path.samples {
        let q = AmbientPoint::new(s.x.clone())?;
        speed_err = speed_err.max((nd.randers_eval(&q, &s.v)?.f - 1.0).abs());
    }
    let mut checks = vec![Check::at_most("unit_speed", speed_err, UNIT_SPEED_TOL)];
    if a.setting == Setting::Ball && c.theta0.cos().abs() < 1e-15 {
        let mut err = 0.0f64;
        for s in &path.samples {
            let (exact, _) = hyperbolic_geodesic(&p, &zeta, s.t)?;
            err = err.max((&s.x - exact).norm());
        }
        checks.push(Check::at_most("hyperbolic_oracle", err, ORACLE_TOL));
    }
    let samples: Vec<Value> = path
        .samples
        .iter()
        .map(|s| json!({ "t": s.t, "x": s.x.as_slice(), "v": s.v.as_slice() }))
        .collect();
    let mut csv = Vec::new();
    path.write_csv(&mut csv)?;
    let body = json!({
        "metric": path.metric,
        "parameterization": path.parameterization,
        "step": path.step,
        "end": path.end().x.as_slice(),
        "samples": samples,
        "checks": checks,
    });
    Ok(Output {
        json: with_config(a, body),
        csv: String::from_utf8(csv).expect("CSV is ASCII"),
        checks,
    })
}

pub fn curvature(a: &CurvatureArgs) -> Result<Output, CliError> {
    let c = &a.common;
    let m = MetricSpec::alpha(c.theta0);
    let dim = c.n + 1;
    let bound = c.theta0.cos().abs();
    let mut rows = Vec::new();
    let mut csv = String::from("height,i,j,k_closed,k_finite_difference,k_printed\n");
    let mut largest = f64::NEG_INFINITY;
    let mut disagreement = 0.0f64;
    for lift in [0.1, 0.25, 0.5, 1.0, 2.0] {
        let x = AmbientPoint::on_axis(c.n, bound + lift)?;
        for i in 0..dim {
            for j in i + 1..dim {
                let r = sectional_curvature(&m, &x, (i, j))?;
                largest = largest.max(r.k_closed_form).max(r.k_finite_difference);
                disagreement = disagreement
                    .max((r.k_closed_form - r.k_finite_difference).abs() / r.k_closed_form.abs().max(1.0));
                let printed = r.k_printed_simplification.map_or(String::new(), |k| format!("{k:?}"));
                let _ = writeln!(
                    csv,
                    "{:?},{i},{j},{:?},{:?},{printed}",
                    bound + lift,
                    r.k_closed_form,
                    r.k_finite_difference
                );
                rows.push(r);
            }
        }
    }
    let limit = bound.acos();
    let sphere: Vec<_> = (1..10)
        .map(|k| {
            let phi = limit * k as f64 / 10.0;
            sphere_convexity(c.theta0, phi).map(|s| json!({ "phi": phi, "c": s.c, "ii_phiphi": s.ii_phiphi, "ii_betabeta": s.ii_betabeta, "positive": s.c > 0.0 && s.ii_phiphi > 0.0 && s.ii_betabeta > 0.0 }))
        })
        .collect::<Result<_, _>>()?;
    let convex = sphere.iter().all(|s| s["positive"] == json!(true));
    let checks = vec![
        Check { name: "all_negative".into(), pass: largest < 0.0, value: largest, tolerance: 0.0 },
        Check::at_most("closed_vs_finite_difference", disagreement, CURVATURE_AGREEMENT_TOL),
        Check { name: "sphere_convex".into(), pass: convex, value: f64::from(u8::from(convex)), tolerance: 1.0 },
    ];
    let body = json!({ "curvatures": rows, "sphere": sphere, "checks": checks });
    Ok(Output {
        json: with_config(a, body),
        csv,
        checks,
    })
}

pub fn convergence(a: &ConvergenceArgs) -> Result<Output, CliError> {
    let c: &Common = &a.common;
    if let SurfaceArg::File(_) = c.surface {
        return Err(CliError::Invalid("refinement sweeps need a generated surface (cap or perturbed)".into()));
    }
    let finest = c.resolution.unwrap_or(512);
    if finest < 2 * COARSEST {
        return Err(CliError::Invalid(format!("finest resolution must be at least {}", 2 * COARSEST)));
    }
    let mut resolutions = vec![COARSEST];
    while resolutions.last().unwrap() * 2 <= finest {
        resolutions.push(resolutions.last().unwrap() * 2);
    }
    let surfaces: HashMap<usize, DiscreteHypersurface> = resolutions
        .iter()
        .map(|&m| c.surface(a.setting, m).map(|s| (m, s)))
        .collect::<Result<_, _>>()?;
    let rows = sweep(&resolutions, |m| {
        let s = &surfaces[&m];
        let report = hk(s, a.setting, c.theta0)?;
        let mink = match a.setting {
            Setting::Ball => Some(minkowski_check(s, c.theta0)?),
            Setting::Halfspace => None,
        };
        Ok((report, mink))
    })?;

    let relative: Vec<(usize, f64)> = rows.iter().map(|(r, _)| (r.resolution, r.relative_deficit())).collect();
    // Caps converge to zero deficit; other surfaces to an unknown limit, so
    // successive differences stand in for the error.
    let deficit_errors: Vec<(usize, f64)> = if c.is_cap() {
        relative.clone()
    } else {
        relative.windows(2).map(|w| (w[0].0, w[0].1 - w[1].1)).collect()
    };
    let deficit_order = observed_order(&deficit_errors, ROUNDOFF_FLOOR);
    let mink_errors: Vec<(usize, f64)> = rows
        .iter()
        .filter_map(|(r, m)| m.as_ref().filter(|m| m.in_scope).map(|m| (r.resolution, m.residual / m.scale)))
        .collect();
    let mink_order = observed_order(&mink_errors, ROUNDOFF_FLOOR);

    let order_check = |name: &str, order: Option<f64>| Check {
        name: name.into(),
        pass: order.map_or(true, |p| p >= MIN_ORDER),
        value: order.unwrap_or(f64::INFINITY),
        tolerance: MIN_ORDER,
    };
    let mut checks = vec![order_check("deficit_order", deficit_order)];
    if mink_errors.len() >= 2 {
        checks.push(order_check("minkowski_order", mink_order));
    }

    let mut finest_report = rows.last().unwrap().0.clone();
    finest_report.convergence =
        rows.iter().map(|(r, _)| ConvergencePoint { resolution: r.resolution, deficit: r.deficit }).collect();
    let mut csv = String::from("resolution,lhs,rhs,deficit,relative_deficit,minkowski_residual\n");
    for (r, _) in &rows {
        let _ = writeln!(
            csv,
            "{},{:?},{:?},{:?},{:?},{:?}",
            r.resolution,
            r.lhs,
            r.rhs,
            r.deficit,
            r.relative_deficit(),
            r.minkowski_residual
        );
    }
    let table: Vec<Value> = rows
        .iter()
        .map(|(r, m)| {
            json!({
                "resolution": r.resolution,
                "lhs": r.lhs,
                "rhs": r.rhs,
                "deficit": r.deficit,
                "relative_deficit": r.relative_deficit(),
                "minkowski_residual": r.minkowski_residual,
                "minkowski": m,
            })
        })
        .collect();
    let body = json!({
        "report": finest_report,
        "table": table,
        "deficit_order": deficit_order,
        "minkowski_order": mink_order,
        "checks": checks,
    });
    Ok(Output {
        json: with_config(a, body),
        csv,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_shrinks_to_the_floor() {
        assert!(discretization_tol(64) > discretization_tol(128));
        assert_eq!(discretization_tol(1 << 20), EQUALITY_TOL);
    }

    #[test]
    fn config_is_echoed_first_class() {
        let v = with_config(&json!({ "theta0": 1.0 }), json!({ "lhs": 2.0 }));
        assert_eq!(v["config"]["theta0"], 1.0);
        assert_eq!(v["lhs"], 2.0);
    }
}
