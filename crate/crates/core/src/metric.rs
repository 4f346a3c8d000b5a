use serde::{Deserialize, Serialize};

use crate::chart::{AxisKind, Chart};
use crate::complexes::CylinderSpace;
use crate::error::{Error, Result};
use crate::geodesic::{self, SolverConfig};
use crate::quotient::{Glued, QuotientSpace};
use crate::warp::WarpVector;

/// Default relative tolerance for [`path_length`].
pub const DEFAULT_LENGTH_TOL: f64 = 1e-9;
/// Deepest dyadic refinement attempted by [`path_length`].
pub const MAX_REFINEMENT_DEPTH: u32 = 24;

/// Algebraic description of a metric space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceDescriptor {
    Line,
    Interval {
        a: f64,
        b: f64,
    },
    Circle {
        circumference: f64,
    },
    Scaled {
        factor: f64,
        inner: Box<SpaceDescriptor>,
    },
    Product {
        factors: Vec<SpaceDescriptor>,
    },
    Warped {
        inner: Box<SpaceDescriptor>,
        warp: WarpVector,
    },
    Cylinder(Box<CylinderSpace>),
    Quotient(Box<QuotientSpace>),
}

/// A space after warps and scalings have been pushed through any gluing.
#[derive(Clone, Debug)]
pub enum Resolved {
    Chart(Chart),
    Quotient(Glued),
}

impl SpaceDescriptor {
    pub fn circle(circumference: f64) -> Self {
        SpaceDescriptor::Circle { circumference }
    }

    pub fn interval(a: f64, b: f64) -> Self {
        SpaceDescriptor::Interval { a, b }
    }

    pub fn scaled(factor: f64, inner: SpaceDescriptor) -> Self {
        SpaceDescriptor::Scaled {
            factor,
            inner: Box::new(inner),
        }
    }

    pub fn product(factors: Vec<SpaceDescriptor>) -> Self {
        SpaceDescriptor::Product { factors }
    }

    pub fn warped(inner: SpaceDescriptor, warp: WarpVector) -> Self {
        SpaceDescriptor::Warped {
            inner: Box::new(inner),
            warp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |what: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidDescriptor(format!(
                    "{what} must be finite and positive, got {v}"
                )))
            }
        };
        match self {
            SpaceDescriptor::Line => Ok(()),
            SpaceDescriptor::Interval { a, b } => {
                if a.is_finite() && b.is_finite() && a < b {
                    Ok(())
                } else {
                    Err(Error::InvalidDescriptor(format!(
                        "interval needs finite a < b, got [{a}, {b}]"
                    )))
                }
            }
            SpaceDescriptor::Circle { circumference } => positive("circumference", *circumference),
            SpaceDescriptor::Scaled { factor, inner } => {
                positive("scale factor", *factor)?;
                inner.validate()
            }
            SpaceDescriptor::Product { factors } => {
                if factors.is_empty() {
                    return Err(Error::InvalidDescriptor("empty product".into()));
                }
                factors.iter().try_for_each(SpaceDescriptor::validate)
            }
            SpaceDescriptor::Warped { inner, warp } => {
                warp.validate()?;
                inner.validate()
            }
            SpaceDescriptor::Cylinder(c) => c.quotient.validate(),
            SpaceDescriptor::Quotient(q) => q.validate(),
        }
    }

    /// True for descriptors with a closed-form metric.
    pub fn is_primitive(&self) -> bool {
        match self {
            SpaceDescriptor::Line
            | SpaceDescriptor::Interval { .. }
            | SpaceDescriptor::Circle { .. } => true,
            SpaceDescriptor::Scaled { inner, .. } => inner.is_primitive(),
            SpaceDescriptor::Product { factors } => factors.iter().all(|f| f.is_primitive()),
            SpaceDescriptor::Warped { .. }
            | SpaceDescriptor::Cylinder(_)
            | SpaceDescriptor::Quotient(_) => false,
        }
    }

    pub fn resolve(&self) -> Result<Resolved> {
        self.validate()?;
        match self.as_quotient()? {
            Some(q) => Ok(Resolved::Quotient(Glued::new(q)?)),
            None => Ok(Resolved::Chart(Chart::new(self)?)),
        }
    }

    /// The glued space this descriptor denotes, or `None` for single charts.
    pub fn as_quotient(&self) -> Result<Option<QuotientSpace>> {
        if self.is_single_chart() {
            return Ok(None);
        }
        Ok(Some(match self {
            SpaceDescriptor::Cylinder(c) => c.quotient.clone(),
            SpaceDescriptor::Quotient(q) => (**q).clone(),
            SpaceDescriptor::Warped { inner, warp } => inner.glued_inner()?.warped(warp),
            SpaceDescriptor::Scaled { factor, inner } => inner.glued_inner()?.scaled(*factor),
            _ => {
                return Err(Error::Unsupported(
                    "products with a glued factor; warp the glued space instead".into(),
                ))
            }
        }))
    }

    fn glued_inner(&self) -> Result<QuotientSpace> {
        Ok(self.as_quotient()?.expect("caller checked the inner space is glued"))
    }

    pub fn is_single_chart(&self) -> bool {
        match self {
            SpaceDescriptor::Line
            | SpaceDescriptor::Interval { .. }
            | SpaceDescriptor::Circle { .. } => true,
            SpaceDescriptor::Scaled { inner, .. } | SpaceDescriptor::Warped { inner, .. } => {
                inner.is_single_chart()
            }
            SpaceDescriptor::Product { factors } => factors.iter().all(|f| f.is_single_chart()),
            SpaceDescriptor::Cylinder(_) | SpaceDescriptor::Quotient(_) => false,
        }
    }

    /// Flatten a structured point into chart coordinates, normalizing circle
    /// coordinates.
    pub fn flatten(&self, p: &PointCoord) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        flatten_into(self, p, &mut out)?;
        Ok(out)
    }

    /// Inverse of [`SpaceDescriptor::flatten`].
    pub fn unflatten(&self, coords: &[f64]) -> Result<PointCoord> {
        let mut idx = 0;
        let p = unflatten_from(self, coords, &mut idx)?;
        if idx != coords.len() {
            return Err(Error::shape(
                format!("{idx} coordinates"),
                format!("{} coordinates", coords.len()),
            ));
        }
        Ok(p)
    }
}

/// Coordinates of a point, shaped like its space's descriptor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointCoord {
    Real(f64),
    Tuple(Vec<PointCoord>),
    Warped {
        base: Box<PointCoord>,
        fiber: Vec<f64>,
    },
    Piece {
        piece: usize,
        coord: Box<PointCoord>,
    },
}

impl PointCoord {
    pub fn tuple(items: impl IntoIterator<Item = f64>) -> Self {
        PointCoord::Tuple(items.into_iter().map(PointCoord::Real).collect())
    }

    pub fn warped(base: PointCoord, fiber: Vec<f64>) -> Self {
        PointCoord::Warped {
            base: Box::new(base),
            fiber,
        }
    }

    pub fn piece(piece: usize, coord: PointCoord) -> Self {
        PointCoord::Piece {
            piece,
            coord: Box::new(coord),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            PointCoord::Real(_) => "real",
            PointCoord::Tuple(_) => "tuple",
            PointCoord::Warped { .. } => "warped point",
            PointCoord::Piece { .. } => "piece-tagged point",
        }
    }
}

fn flatten_into(desc: &SpaceDescriptor, p: &PointCoord, out: &mut Vec<f64>) -> Result<()> {
    match (desc, p) {
        (SpaceDescriptor::Line, PointCoord::Real(x)) => {
            finite(*x)?;
            out.push(*x);
        }
        (SpaceDescriptor::Interval { a, b }, PointCoord::Real(x)) => {
            finite(*x)?;
            let slack = 1e-12 * (b - a).max(1.0);
            if *x < a - slack || *x > b + slack {
                return Err(Error::InvalidDescriptor(format!(
                    "coordinate {x} outside interval [{a}, {b}]"
                )));
            }
            out.push(x.clamp(*a, *b));
        }
        (SpaceDescriptor::Circle { circumference }, PointCoord::Real(x)) => {
            finite(*x)?;
            let mut y = x.rem_euclid(*circumference);
            if y >= *circumference {
                y = 0.0;
            }
            out.push(y);
        }
        (SpaceDescriptor::Scaled { inner, .. }, p) => flatten_into(inner, p, out)?,
        (SpaceDescriptor::Product { factors }, PointCoord::Tuple(items)) => {
            if factors.len() != items.len() {
                return Err(Error::shape(
                    format!("tuple of {}", factors.len()),
                    format!("tuple of {}", items.len()),
                ));
            }
            for (f, item) in factors.iter().zip(items) {
                flatten_into(f, item, out)?;
            }
        }
        (SpaceDescriptor::Warped { inner, warp }, PointCoord::Warped { base, fiber }) => {
            if fiber.len() != warp.len() {
                return Err(Error::shape(
                    format!("fiber of dimension {}", warp.len()),
                    format!("fiber of dimension {}", fiber.len()),
                ));
            }
            flatten_into(inner, base, out)?;
            for t in fiber {
                finite(*t)?;
                out.push(*t);
            }
        }
        (SpaceDescriptor::Cylinder(_) | SpaceDescriptor::Quotient(_), _) => {
            return Err(Error::NotChart("glued space".into()))
        }
        (d, p) => {
            return Err(Error::shape(
                expected_shape(d),
                p.kind().to_string(),
            ))
        }
    }
    Ok(())
}

fn expected_shape(desc: &SpaceDescriptor) -> String {
    match desc {
        SpaceDescriptor::Line | SpaceDescriptor::Interval { .. } | SpaceDescriptor::Circle { .. } => {
            "real".into()
        }
        SpaceDescriptor::Scaled { inner, .. } => expected_shape(inner),
        SpaceDescriptor::Product { factors } => format!("tuple of {}", factors.len()),
        SpaceDescriptor::Warped { .. } => "warped point {base, fiber}".into(),
        SpaceDescriptor::Cylinder(_) | SpaceDescriptor::Quotient(_) => "piece-tagged point".into(),
    }
}

fn finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidDescriptor(format!("non-finite coordinate {x}")))
    }
}

fn unflatten_from(desc: &SpaceDescriptor, coords: &[f64], idx: &mut usize) -> Result<PointCoord> {
    let take = |idx: &mut usize| -> Result<f64> {
        let v = coords
            .get(*idx)
            .copied()
            .ok_or_else(|| Error::shape("more coordinates", format!("{}", coords.len())))?;
        *idx += 1;
        Ok(v)
    };
    Ok(match desc {
        SpaceDescriptor::Line | SpaceDescriptor::Interval { .. } | SpaceDescriptor::Circle { .. } => {
            PointCoord::Real(take(idx)?)
        }
        SpaceDescriptor::Scaled { inner, .. } => unflatten_from(inner, coords, idx)?,
        SpaceDescriptor::Product { factors } => PointCoord::Tuple(
            factors
                .iter()
                .map(|f| unflatten_from(f, coords, idx))
                .collect::<Result<_>>()?,
        ),
        SpaceDescriptor::Warped { inner, warp } => {
            let base = unflatten_from(inner, coords, idx)?;
            let fiber = (0..warp.len()).map(|_| take(idx)).collect::<Result<_>>()?;
            PointCoord::warped(base, fiber)
        }
        SpaceDescriptor::Cylinder(_) | SpaceDescriptor::Quotient(_) => {
            return Err(Error::NotChart("glued space".into()))
        }
    })
}

/// Piecewise coordinate-linear path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyPath {
    waypoints: Vec<PointCoord>,
    params: Vec<f64>,
}

impl PolyPath {
    pub fn new(waypoints: Vec<PointCoord>, params: Vec<f64>) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(Error::InvalidDescriptor("path has no waypoints".into()));
        }
        if waypoints.len() != params.len() {
            return Err(Error::shape(
                format!("{} params", waypoints.len()),
                format!("{} params", params.len()),
            ));
        }
        let ends_ok = if params.len() == 1 {
            params[0] == 0.0
        } else {
            params[0] == 0.0 && params[params.len() - 1] == 1.0
        };
        if !ends_ok || params.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDescriptor(
                "path params must increase strictly from 0 to 1".into(),
            ));
        }
        Ok(PolyPath { waypoints, params })
    }

    /// Waypoints with evenly spaced parameters.
    pub fn uniform(waypoints: Vec<PointCoord>) -> Result<Self> {
        let n = waypoints.len();
        let params = match n {
            0 => Vec::new(),
            1 => vec![0.0],
            _ => (0..n)
                .map(|i| if i + 1 == n { 1.0 } else { i as f64 / (n - 1) as f64 })
                .collect(),
        };
        PolyPath::new(waypoints, params)
    }

    pub fn waypoints(&self) -> &[PointCoord] {
        &self.waypoints
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn start(&self) -> &PointCoord {
        &self.waypoints[0]
    }

    pub fn end(&self) -> &PointCoord {
        &self.waypoints[self.waypoints.len() - 1]
    }

    pub fn reversed(&self) -> Self {
        let waypoints = self.waypoints.iter().rev().cloned().collect();
        let params = self.params.iter().rev().map(|t| 1.0 - t).collect();
        PolyPath { waypoints, params }
    }
}

/// Closed-form distance in a primitive space.
pub fn base_distance(space: &SpaceDescriptor, p: &PointCoord, q: &PointCoord) -> Result<f64> {
    space.validate()?;
    if !space.is_primitive() {
        return Err(Error::NotPrimitive(describe(space)));
    }
    let chart = Chart::new(space)?;
    let a = space.flatten(p)?;
    let b = space.flatten(q)?;
    Ok(chart.base_distance(&a, &b))
}

fn describe(space: &SpaceDescriptor) -> String {
    match space {
        SpaceDescriptor::Warped { .. } => "warped product".into(),
        SpaceDescriptor::Cylinder(_) => "mapping cylinder".into(),
        SpaceDescriptor::Quotient(_) => "quotient".into(),
        SpaceDescriptor::Scaled { inner, .. } => describe(inner),
        SpaceDescriptor::Product { factors } => factors
            .iter()
            .find(|f| !f.is_primitive())
            .map(describe)
            .unwrap_or_else(|| "product".into()),
        _ => "space".into(),
    }
}

/// One point of a resolved space: piece index (0 for charts) plus chart
/// coordinates.
pub(crate) type FlatPoint = (usize, Vec<f64>);

/// Resolve `space` and flatten every waypoint against its descriptor.
pub(crate) fn prepare(space: &SpaceDescriptor, path: &PolyPath) -> Result<(Resolved, Vec<FlatPoint>)> {
    let resolved = space.resolve()?;
    let points = match &resolved {
        Resolved::Chart(chart) => path
            .waypoints()
            .iter()
            .map(|p| {
                let mut c = space.flatten(p)?;
                chart.normalize(&mut c);
                Ok((0, c))
            })
            .collect::<Result<Vec<_>>>()?,
        Resolved::Quotient(q) => path
            .waypoints()
            .iter()
            .map(|p| q.flatten_point(p))
            .collect::<Result<Vec<_>>>()?,
    };
    Ok((resolved, points))
}

/// Partition sum after splitting every path segment into `2^depth` equal
/// coordinate steps.
pub fn partition_sum(space: &SpaceDescriptor, path: &PolyPath, depth: u32) -> Result<f64> {
    let (resolved, points) = prepare(space, path)?;
    resolved_partition_sum(&resolved, &points, depth)
}

pub(crate) fn resolved_partition_sum(resolved: &Resolved, points: &[FlatPoint], depth: u32) -> Result<f64> {
    let m = 1usize << depth;
    let mut total = 0.0;
    for w in points.windows(2) {
        let ((pa, a), (pb, b)) = (&w[0], &w[1]);
        let chart = match resolved {
            Resolved::Chart(chart) => chart,
            Resolved::Quotient(q) => {
                if q.identified((*pa, a.as_slice()), (*pb, b.as_slice())) {
                    continue;
                }
                if pa != pb {
                    return Err(Error::InvalidDescriptor(format!(
                        "path jumps from piece {pa} to piece {pb} away from an identification"
                    )));
                }
                q.chart(*pa)
            }
        };
        total += chart_segment_sum(chart, a, b, m);
    }
    Ok(total)
}

pub(crate) fn chart_segment_sum(chart: &Chart, a: &[f64], b: &[f64], m: usize) -> f64 {
    let delta = chart.wrap_delta(a, b);
    let step: Vec<f64> = delta.iter().map(|d| d / m as f64).collect();
    let mut pos = a.to_vec();
    let mut sum = 0.0;
    for j in 1..=m {
        let u = j as f64 / m as f64;
        for (k, slot) in pos.iter_mut().enumerate() {
            *slot = a[k] + u * delta[k];
        }
        sum += chart.eval(&pos, &step);
    }
    sum
}

/// Length of `path` as the limit of dyadically refined partition sums.
///
/// Successive sums are Richardson-extrapolated; refinement stops once two
/// consecutive extrapolated estimates agree to `tol` relatively.
pub fn path_length(space: &SpaceDescriptor, path: &PolyPath, tol: f64) -> Result<f64> {
    let (resolved, points) = prepare(space, path)?;
    refine(|depth| resolved_partition_sum(&resolved, &points, depth), tol)
}

pub(crate) fn refine(mut sum: impl FnMut(u32) -> Result<f64>, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidDescriptor(format!("tolerance must be positive, got {tol}")));
    }
    let mut prev_row: Vec<f64> = Vec::new();
    for depth in 0..=MAX_REFINEMENT_DEPTH {
        let mut row = vec![sum(depth)?];
        for j in 1..=depth as usize {
            let factor = (1u64 << j) as f64 - 1.0;
            let t = row[j - 1] + (row[j - 1] - prev_row[j - 1]) / factor;
            row.push(t);
        }
        if depth > 0 {
            let last = row[depth as usize];
            let previous = prev_row[depth as usize - 1];
            if (last - previous).abs() <= tol * last.abs() {
                return Ok(last.max(0.0));
            }
        }
        prev_row = row;
    }
    let n = prev_row.len();
    Err(Error::Convergence {
        last: prev_row[n - 1],
        previous: if n > 1 { prev_row[n - 2] } else { prev_row[n - 1] },
    })
}

/// The induced length metric d′: closed form on primitives, solver otherwise.
pub fn induced_length_metric(
    space: &SpaceDescriptor,
    p: &PointCoord,
    q: &PointCoord,
    cfg: &SolverConfig,
) -> Result<f64> {
    if space.is_primitive() {
        return base_distance(space, p, q);
    }
    Ok(geodesic::distance(space, p, q, cfg)?.length)
}

impl SpaceDescriptor {
    /// Axis kinds of the chart, if this is a single-chart space.
    pub fn axis_kinds(&self) -> Result<Vec<AxisKind>> {
        Ok(Chart::new(self)?.axes().iter().map(|a| a.kind).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line2() -> SpaceDescriptor {
        SpaceDescriptor::product(vec![SpaceDescriptor::Line, SpaceDescriptor::Line])
    }

    #[test]
    fn closed_forms() {
        let c = SpaceDescriptor::circle(1.0);
        let d = base_distance(&c, &PointCoord::Real(0.1), &PointCoord::Real(0.9)).unwrap();
        assert!((d - 0.2).abs() < 1e-15);
        let s = SpaceDescriptor::scaled(3.0, SpaceDescriptor::Line);
        assert_eq!(base_distance(&s, &PointCoord::Real(0.0), &PointCoord::Real(2.0)).unwrap(), 6.0);
        let p = base_distance(&line2(), &PointCoord::tuple([0.0, 0.0]), &PointCoord::tuple([3.0, 4.0]));
        assert_eq!(p.unwrap(), 5.0);
    }

    #[test]
    fn base_distance_rejects_shapes_and_warps() {
        assert!(matches!(
            base_distance(&line2(), &PointCoord::Real(0.0), &PointCoord::Real(1.0)),
            Err(Error::ShapeMismatch { .. })
        ));
        let w = SpaceDescriptor::warped(SpaceDescriptor::Line, WarpVector::single("e", 2.0).unwrap());
        let p = PointCoord::warped(PointCoord::Real(0.0), vec![0.0]);
        assert!(matches!(base_distance(&w, &p, &p), Err(Error::NotPrimitive(_))));
    }

    #[test]
    fn descriptor_validation() {
        assert!(SpaceDescriptor::interval(1.0, 1.0).validate().is_err());
        assert!(SpaceDescriptor::circle(0.0).validate().is_err());
        assert!(SpaceDescriptor::scaled(-1.0, SpaceDescriptor::Line).validate().is_err());
        assert!(SpaceDescriptor::product(vec![]).validate().is_err());
    }

    #[test]
    fn circle_loop_and_chord() {
        let c = SpaceDescriptor::circle(1.0);
        let pts = [0.0, 0.25, 0.5, 0.75, 0.0].map(PointCoord::Real).to_vec();
        let len = path_length(&c, &PolyPath::uniform(pts).unwrap(), 1e-9).unwrap();
        assert!((len - 1.0).abs() < 1e-12);
        let chord = PolyPath::uniform(vec![PointCoord::tuple([0.0, 0.0]), PointCoord::tuple([3.0, 4.0])]).unwrap();
        assert!((path_length(&line2(), &chord, 1e-9).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn path_params_validated() {
        let pts = vec![PointCoord::Real(0.0), PointCoord::Real(1.0)];
        assert!(PolyPath::new(pts.clone(), vec![0.0, 0.5]).is_err());
        assert!(PolyPath::new(pts.clone(), vec![0.0]).is_err());
        assert!(PolyPath::new(pts, vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn flatten_roundtrip_normalizes_circles() {
        let d = SpaceDescriptor::warped(
            SpaceDescriptor::product(vec![SpaceDescriptor::circle(2.0), SpaceDescriptor::interval(0.0, 1.0)]),
            WarpVector::new(vec![("a".into(), 2.0), ("b".into(), 0.5)]).unwrap(),
        );
        let p = PointCoord::warped(PointCoord::tuple([2.5, 0.25]), vec![1.0, -1.0]);
        let flat = d.flatten(&p).unwrap();
        assert_eq!(flat, vec![0.5, 0.25, 1.0, -1.0]);
        let back = d.unflatten(&flat).unwrap();
        assert_eq!(back, PointCoord::warped(PointCoord::tuple([0.5, 0.25]), vec![1.0, -1.0]));
    }

    #[test]
    fn descriptor_json_roundtrip() {
        let d = SpaceDescriptor::warped(
            SpaceDescriptor::scaled(0.5, SpaceDescriptor::circle(1.0)),
            WarpVector::single("t", 0.1).unwrap(),
        );
        let s = serde_json::to_string(&d).unwrap();
        let back: SpaceDescriptor = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
        assert_eq!(serde_json::to_string(&back).unwrap(), s);
    }

    #[test]
    fn richardson_reports_nonconvergence() {
        let err = refine(|d| Ok(d as f64), 1e-9).unwrap_err();
        assert!(matches!(err, Error::Convergence { .. }));
    }
}
