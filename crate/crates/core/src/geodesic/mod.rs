//! Numerical distances and minimizing paths.

mod solver;

use serde::{Deserialize, Serialize};

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::metric::{path_length, PointCoord, PolyPath, Resolved, SpaceDescriptor};
use crate::quotient;

pub(crate) use solver::{solve as solve_chart, Settings};

/// Net parameters used whenever a query has to cross identifications.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetConfig {
    pub epsilon: f64,
    /// Intra-piece edges join nodes closer than `radius_factor · epsilon`.
    pub radius_factor: f64,
    /// Sampling bounds applied to every unbounded axis (lines and fibers).
    pub window: [f64; 2],
    /// Waypoints per solver call on warped net edges.
    pub edge_waypoints: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            epsilon: 0.1,
            radius_factor: 3.0,
            window: [-2.0, 2.0],
            edge_waypoints: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub n_waypoints: usize,
    pub max_iters: usize,
    pub step_tol: f64,
    pub length_tol: f64,
    pub restarts: usize,
    pub rng_seed: u64,
    /// Largest number of extra turns tried around each circle factor.
    pub winding: i32,
    pub net: NetConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            n_waypoints: 33,
            max_iters: 200,
            step_tol: 1e-8,
            length_tol: 1e-6,
            restarts: 3,
            rng_seed: 0,
            winding: 2,
            net: NetConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |f: &str, why: &str| Err(Error::spec(f, why));
        if self.n_waypoints < 2 {
            return bad("n_waypoints", "must be at least 2");
        }
        if self.max_iters == 0 {
            return bad("max_iters", "must be positive");
        }
        for (f, v) in [
            ("step_tol", self.step_tol),
            ("length_tol", self.length_tol),
            ("net.epsilon", self.net.epsilon),
            ("net.radius_factor", self.net.radius_factor),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(f, "must be positive");
            }
        }
        if !(self.net.window[0] < self.net.window[1]) {
            return bad("net.window", "needs lo < hi");
        }
        if self.net.edge_waypoints < 2 {
            return bad("net.edge_waypoints", "must be at least 2");
        }
        Ok(())
    }

    pub(crate) fn settings(&self) -> Settings {
        Settings {
            n_waypoints: self.n_waypoints,
            max_iters: self.max_iters,
            step_tol: self.step_tol,
            restarts: self.restarts,
            seed: self.rng_seed,
            winding: self.winding,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicResult {
    pub length: f64,
    pub path: PolyPath,
    pub converged: bool,
    pub restarts_used: usize,
    /// Resolution of the net when the answer came from one.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub net_epsilon: Option<f64>,
}

/// Shortest path found between `p` and `q`.
pub fn distance(
    space: &SpaceDescriptor,
    p: &PointCoord,
    q: &PointCoord,
    cfg: &SolverConfig,
) -> Result<GeodesicResult> {
    cfg.validate()?;
    match space.resolve()? {
        Resolved::Chart(chart) => chart_distance(space, &chart, p, q, cfg),
        Resolved::Quotient(glued) => quotient::geodesic(&glued.space, p, q, cfg),
    }
}

fn chart_distance(
    space: &SpaceDescriptor,
    chart: &Chart,
    p: &PointCoord,
    q: &PointCoord,
    cfg: &SolverConfig,
) -> Result<GeodesicResult> {
    let mut a = space.flatten(p)?;
    let mut b = space.flatten(q)?;
    chart.normalize(&mut a);
    chart.normalize(&mut b);
    let to_point = |c: &[f64]| {
        let mut c = c.to_vec();
        chart.normalize(&mut c);
        space.unflatten(&c)
    };

    if chart.is_flat() {
        let path = PolyPath::uniform(vec![to_point(&a)?, to_point(&b)?])?;
        return Ok(GeodesicResult {
            length: chart.base_distance(&a, &b),
            path,
            converged: true,
            restarts_used: 0,
            net_epsilon: None,
        });
    }

    let sol = solve_chart(chart, &a, &b, &cfg.settings());
    let mut waypoints = sol.coords.iter().map(|c| to_point(c)).collect::<Result<Vec<_>>>()?;
    // Endpoints are reported exactly as queried.
    let last = waypoints.len() - 1;
    waypoints[0] = to_point(&a)?;
    waypoints[last] = to_point(&b)?;
    let path = PolyPath::uniform(waypoints)?;
    let length = path_length(space, &path, cfg.length_tol.min(1e-9)).unwrap_or(sol.length);
    Ok(GeodesicResult {
        length,
        path,
        converged: sol.converged,
        restarts_used: sol.restarts_used,
        net_epsilon: None,
    })
}

const BASE_STEP_FLOOR: f64 = 1e-10;

/// Inner-space component of a geodesic in a warped product, reparameterized
/// by arclength with repeated points collapsed.
pub fn project_to_base(space: &SpaceDescriptor, result: &GeodesicResult) -> Result<PolyPath> {
    let SpaceDescriptor::Warped { inner, .. } = space else {
        return Err(Error::Unsupported("projection needs a warped product".into()));
    };
    if !result.converged {
        return Err(Error::NotConverged);
    }
    let bases = result
        .path
        .waypoints()
        .iter()
        .map(|p| match p {
            PointCoord::Warped { base, .. } => Ok((**base).clone()),
            other => Err(Error::shape("warped point", format!("{other:?}"))),
        })
        .collect::<Result<Vec<_>>>()?;

    let inner_chart = Chart::new(inner)?;
    let flat = bases.iter().map(|b| inner.flatten(b)).collect::<Result<Vec<_>>>()?;
    let mut kept = vec![0usize];
    let mut cumulative = vec![0.0];
    for i in 1..flat.len() {
        let prev = &flat[*kept.last().expect("nonempty")];
        let delta = inner_chart.wrap_delta(prev, &flat[i]);
        let step = inner_chart.segment_length(prev, &delta);
        // Solver noise leaves tiny base drift on vertical geodesics.
        if step > BASE_STEP_FLOOR {
            kept.push(i);
            cumulative.push(cumulative.last().expect("nonempty") + step);
        }
    }
    let total = *cumulative.last().expect("nonempty");
    let waypoints = kept.iter().map(|&i| bases[i].clone()).collect();
    if total == 0.0 {
        return PolyPath::new(waypoints, vec![0.0]);
    }
    let mut params: Vec<f64> = cumulative.iter().map(|c| c / total).collect();
    *params.last_mut().expect("nonempty") = 1.0;
    PolyPath::new(waypoints, params)
}

/// Closed-form distance in ℝ ×_λ ℝ.
///
/// (x, t) ↦ (c·x, λ^{-t}) with c = ln λ carries the warped length element to
/// 1/|c| times the upper half-plane element.
pub fn hyperbolic_oracle(lambda: f64, p: (f64, f64), q: (f64, f64)) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) || lambda == 1.0 {
        return Err(Error::InvalidDescriptor(format!(
            "hyperbolic oracle needs positive lambda != 1, got {lambda}"
        )));
    }
    let c = lambda.ln();
    let (v1, v2) = ((-c * p.1).exp(), (-c * q.1).exp());
    let num = (c * (p.0 - q.0)).powi(2) + (v1 - v2).powi(2);
    Ok(2.0 * (num / (4.0 * v1 * v2)).sqrt().asinh() / c.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warp::WarpVector;
    use std::f64::consts::E;

    fn plane(lambda: f64) -> SpaceDescriptor {
        SpaceDescriptor::warped(SpaceDescriptor::Line, WarpVector::single("e", lambda).unwrap())
    }

    fn pt(x: f64, t: f64) -> PointCoord {
        PointCoord::warped(PointCoord::Real(x), vec![t])
    }

    #[test]
    fn oracle_examples() {
        assert!((hyperbolic_oracle(E, (0.0, 0.0), (0.0, 5.0)).unwrap() - 5.0).abs() < 1e-12);
        assert!((hyperbolic_oracle(E, (0.0, 0.0), (1.0, 0.0)).unwrap() - 1.5f64.acosh()).abs() < 1e-12);
        assert!((hyperbolic_oracle(1.0001, (0.0, 0.0), (1.0, 0.0)).unwrap() - 1.0).abs() < 1e-3);
        assert!(hyperbolic_oracle(1.0, (0.0, 0.0), (1.0, 0.0)).is_err());
        // λ and 1/λ are mirror images under t ↦ -t.
        let a = hyperbolic_oracle(0.5, (0.2, 0.3), (1.0, -0.4)).unwrap();
        let b = hyperbolic_oracle(2.0, (0.2, -0.3), (1.0, 0.4)).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn vertical_geodesic_is_straight() {
        let r = distance(&plane(E), &pt(0.0, 0.0), &pt(0.0, 5.0), &SolverConfig::default()).unwrap();
        assert!((r.length - 5.0).abs() < 1e-9);
        let base = project_to_base(&plane(E), &r).unwrap();
        assert_eq!(base.len(), 1);
    }

    #[test]
    fn flat_and_circle_queries() {
        let c = SpaceDescriptor::circle(1.0);
        let r = distance(&c, &PointCoord::Real(0.0), &PointCoord::Real(0.5), &SolverConfig::default()).unwrap();
        assert_eq!(r.length, 0.5);
        assert!(r.converged);
    }

    #[test]
    fn horizontal_pair_matches_oracle() {
        let r = distance(&plane(E), &pt(0.0, 0.0), &pt(1.0, 0.0), &SolverConfig::default()).unwrap();
        assert!(r.converged);
        let exact = 1.5f64.acosh();
        assert!((r.length - exact).abs() / exact < 1e-4, "{}", r.length);
        assert!(r.length >= exact - 1e-9);
        let base = project_to_base(&plane(E), &r).unwrap();
        let l = path_length(&SpaceDescriptor::Line, &base, 1e-12).unwrap();
        assert!((l - 1.0).abs() < 1e-9);
    }

    #[test]
    fn interval_base_projection_stays_inside() {
        let space = SpaceDescriptor::warped(
            SpaceDescriptor::interval(0.0, 1.0),
            WarpVector::single("e", E).unwrap(),
        );
        let r = distance(&space, &pt(0.0, 0.0), &pt(1.0, 0.5), &SolverConfig::default()).unwrap();
        for w in r.path.waypoints() {
            let PointCoord::Warped { base, .. } = w else { panic!() };
            let PointCoord::Real(x) = **base else { panic!() };
            assert!((0.0..=1.0).contains(&x));
        }
    }

    #[test]
    fn config_validation() {
        let cfg = SolverConfig {
            n_waypoints: 1,
            ..SolverConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
