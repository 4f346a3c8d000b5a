//! Empirical curvature and structure audits.
//!
//! Triangles are sampled in small balls and compared with their Euclidean
//! comparison triangles; nonpositive curvature is local, so nothing here
//! claims a global CAT(0) inequality.

mod checks;
mod probe;

use std::hash::{DefaultHasher, Hash, Hasher};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complexes::{check_collars, CollarReport};
use crate::error::{Error, Result};
use crate::geodesic::{GeodesicResult, Settings, SolverConfig};
use crate::metric::{PointCoord, SpaceDescriptor};
use crate::quotient::{Glued, QuotientMetric};

pub use checks::{
    convexity_check, local_isometry_check, net_axioms, ConvexityReport, IsometryReport, NetAxiomReport, Subspace,
};
use checks::{axis_ranges, convexity_on_net};
use probe::{point_at, ChartPath, Probe};

/// Default fractions at which each side is sampled.
pub const SIDE_FRACTIONS: [f64; 3] = [0.25, 0.5, 0.75];
const DEGENERACY: f64 = 1e-6;
const PAIRING_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditConfig {
    /// Slack above this counts as a violation.
    pub tol: f64,
    /// Triangles are drawn inside balls of this radius.
    pub radius: f64,
    /// Spread vertices over the whole sampling window instead.
    pub large_triangles: bool,
    pub collar_samples: usize,
    pub convexity_pairs: usize,
    pub net_triples: usize,
    pub solver: SolverConfig,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            tol: 1e-4,
            radius: 0.5,
            large_triangles: false,
            collar_samples: 20,
            convexity_pairs: 10,
            net_triples: 100,
            // Slack is a small difference of lengths, so sides are resolved
            // more finely than a plain distance query.
            solver: SolverConfig {
                restarts: 0,
                n_waypoints: 65,
                ..SolverConfig::default()
            },
        }
    }
}

impl AuditConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::spec("tol", "must be positive"));
        }
        if !(self.radius > 0.0) {
            return Err(Error::spec("radius", "must be positive"));
        }
        self.solver.validate()
    }

    pub(crate) fn settings(&self) -> Settings {
        self.solver.settings()
    }
}

/// A geodesic triangle with the side points used for comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangleSample {
    pub vertices: [PointCoord; 3],
    /// Side i runs from vertex i to vertex i+1.
    pub side_geodesics: Vec<GeodesicResult>,
    pub interior_samples: Vec<(usize, f64)>,
}

/// Internal form of a triangle: chart paths of the sides.
struct ChartTriangle {
    probe: Probe,
    sides: Vec<ChartPath>,
    samples: Vec<(usize, f64)>,
}

impl ChartTriangle {
    fn new(probe: Probe, v: [Vec<f64>; 3], s: &Settings) -> Self {
        let sides = (0..3).map(|i| probe.path(&v[i], &v[(i + 1) % 3], s)).collect();
        let samples = (0..3).flat_map(|i| SIDE_FRACTIONS.map(|f| (i, f))).collect();
        ChartTriangle { probe, sides, samples }
    }

    fn lengths(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.sides[i].length())
    }

    fn sample(&self) -> Result<TriangleSample> {
        let vertices = [0, 1, 2].map(|i| self.probe.point(&self.sides[i].coords[0]));
        let [a, b, c] = vertices;
        Ok(TriangleSample {
            vertices: [a?, b?, c?],
            side_geodesics: self.sides.iter().map(|s| self.probe.result(s)).collect::<Result<_>>()?,
            interior_samples: self.samples.clone(),
        })
    }

    /// max over sample pairs of d_space − d_comparison.
    fn slack(&self, s: &Settings) -> Result<f64> {
        if self.sides.iter().any(|p| !p.converged) {
            return Err(Error::NotConverged);
        }
        let [l0, l1, l2] = self.lengths();
        let maxside = l0.max(l1).max(l2);
        // Comparison vertices P0 = (0,0), P1 = (l0, 0), P2 from the law of cosines.
        let x = if l0 > 0.0 { (l0 * l0 + l2 * l2 - l1 * l1) / (2.0 * l0) } else { 0.0 };
        let y = (l2 * l2 - x * x).max(0.0).sqrt();
        let area2 = l0 * y;
        if maxside == 0.0 || area2 / (maxside * maxside) < DEGENERACY {
            return Err(Error::Degenerate(format!("sides {l0:.6}, {l1:.6}, {l2:.6}")));
        }
        let p = [[0.0, 0.0], [l0, 0.0], [x, y]];
        let comp = |side: usize, f: f64| {
            let (a, b) = (p[side], p[(side + 1) % 3]);
            [a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])]
        };
        let mut pairs: Vec<((usize, f64), (usize, f64))> = Vec::new();
        for (i, a) in self.samples.iter().enumerate() {
            for b in &self.samples[i + 1..] {
                if a.0 != b.0 {
                    pairs.push((*a, *b));
                }
            }
        }
        // Vertex k is the start of side k; the opposite side is k+1.
        for k in 0..3 {
            for b in self.samples.iter().filter(|b| b.0 == (k + 1) % 3) {
                pairs.push(((k, 0.0), *b));
            }
        }
        let mut worst = f64::NEG_INFINITY;
        for ((sa, fa), (sb, fb)) in pairs {
            let mut qa = point_at(&self.sides[sa], fa);
            let mut qb = point_at(&self.sides[sb], fb);
            self.probe.chart.normalize(&mut qa);
            self.probe.chart.normalize(&mut qb);
            let d = self.probe.distance(&qa, &qb, s);
            let (ca, cb) = (comp(sa, fa), comp(sb, fb));
            let dc = ((ca[0] - cb[0]).powi(2) + (ca[1] - cb[1]).powi(2)).sqrt();
            worst = worst.max(d - dc);
        }
        Ok(worst)
    }
}

impl TriangleSample {
    /// Solve for the three sides of the triangle with these vertices.
    pub fn new(space: &SpaceDescriptor, vertices: [PointCoord; 3], cfg: &AuditConfig) -> Result<Self> {
        chart_triangle(space, &vertices, cfg)?.sample()
    }

    pub fn side_lengths(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.side_geodesics[i].length)
    }
}

fn chart_triangle(space: &SpaceDescriptor, v: &[PointCoord; 3], cfg: &AuditConfig) -> Result<ChartTriangle> {
    cfg.validate()?;
    let probe = Probe::for_points(space, &[&v[0], &v[1], &v[2]])?;
    let c = [probe.flatten(&v[0])?, probe.flatten(&v[1])?, probe.flatten(&v[2])?];
    Ok(ChartTriangle::new(probe, c, &cfg.settings()))
}

/// Largest comparison slack of `tri`; positive values exceed the Euclidean
/// comparison triangle.
pub fn cat0_check(space: &SpaceDescriptor, tri: &TriangleSample, cfg: &AuditConfig) -> Result<f64> {
    if tri.side_geodesics.iter().any(|g| !g.converged) {
        return Err(Error::NotConverged);
    }
    let mut t = chart_triangle(space, &tri.vertices, cfg)?;
    t.samples = tri.interior_samples.clone();
    t.slack(&cfg.settings())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangleRecord {
    pub index: usize,
    pub piece: Option<usize>,
    pub vertices: Vec<PointCoord>,
    pub side_lengths: [f64; 3],
    pub diameter: f64,
    pub slack: Option<f64>,
    pub symmetry_ok: bool,
    pub triangle_inequality_ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub space_id: String,
    pub n_triangles: usize,
    pub n_evaluated: usize,
    pub n_skipped: usize,
    /// Largest slack seen; positive means a comparison violation.
    pub max_cat0_violation: f64,
    pub n_violations: usize,
    pub n_symmetry_failures: usize,
    pub n_triangle_inequality_failures: usize,
    pub collars: Vec<CollarReport>,
    pub convexity: Vec<ConvexityReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub net: Option<NetAxiomReport>,
    /// Largest length distortion of each identification pairing.
    pub identifications: Vec<(String, f64)>,
    pub seed: u64,
    pub tol: f64,
    pub radius: f64,
    pub large_triangles: bool,
    pub triangles: Vec<TriangleRecord>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    index: usize,
    piece: Option<usize>,
    side0: f64,
    side1: f64,
    side2: f64,
    diameter: f64,
    slack: Option<f64>,
    symmetry_ok: bool,
    triangle_inequality_ok: bool,
    note: &'a str,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.n_violations == 0
            && self.n_symmetry_failures == 0
            && self.n_triangle_inequality_failures == 0
            && self.collars.iter().all(|c| c.passed)
            && self.convexity.iter().all(|c| c.convex)
            && self.net.as_ref().is_none_or(|n| n.passed)
            && self.identifications.iter().all(|(_, d)| *d <= PAIRING_TOL)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("reports are plain data")
    }

    /// One row per triangle.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for t in &self.triangles {
            w.serialize(CsvRow {
                index: t.index,
                piece: t.piece,
                side0: t.side_lengths[0],
                side1: t.side_lengths[1],
                side2: t.side_lengths[2],
                diameter: t.diameter,
                slack: t.slack,
                symmetry_ok: t.symmetry_ok,
                triangle_inequality_ok: t.triangle_inequality_ok,
                note: t.note.as_deref().unwrap_or(""),
            })
            .map_err(|e| Error::InvalidDescriptor(format!("csv: {e}")))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidDescriptor(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Stable identifier of a descriptor: a hash of its JSON form.
pub fn space_id(space: &SpaceDescriptor) -> String {
    let json = serde_json::to_string(space).expect("descriptors serialize");
    let mut h = DefaultHasher::new();
    json.hash(&mut h);
    format!("{:016x}", h.finish())
}

/// Draw triangle vertices, in chart coordinates, for triangle `index`.
fn draw_vertices(probe: &Probe, window: [f64; 2], cfg: &AuditConfig, rng: &mut ChaCha8Rng) -> [Vec<f64>; 3] {
    let chart = &probe.chart;
    let ranges = axis_ranges(chart, window);
    let center: Vec<f64> = ranges.iter().map(|(lo, hi, _)| rng.random_range(*lo..*hi)).collect();
    let dim = chart.dim();
    let mut out: [Vec<f64>; 3] = [center.clone(), center.clone(), center.clone()];
    if cfg.large_triangles {
        let spread: Vec<f64> = ranges.iter().map(|(lo, hi, _)| hi - lo).collect();
        for (k, v) in out.iter_mut().enumerate() {
            for (i, (lo, hi, periodic)) in ranges.iter().enumerate() {
                v[i] = if *periodic {
                    center[i] + spread[i] * (k as f64 / 3.0 + rng.random_range(-0.03..0.03))
                } else {
                    rng.random_range(*lo..*hi)
                };
            }
        }
    } else {
        // Local length of a unit coordinate step at the center, per axis.
        let unit: Vec<f64> = (0..dim)
            .map(|i| {
                let mut e = vec![0.0; dim];
                e[i] = 1.0;
                chart.eval(&center, &e).max(1e-300)
            })
            .collect();
        // Balls stay below an eighth of the shortest loop through the center,
        // where geodesics between their points are unique.
        let systole = chart
            .axes()
            .iter()
            .enumerate()
            .filter_map(|(i, ax)| ax.circumference().map(|c| c * unit[i]))
            .fold(f64::INFINITY, f64::min);
        let radius = cfg.radius.min(systole / 8.0);
        for v in out.iter_mut() {
            let dir: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-12);
            let len = radius * rng.random::<f64>().powf(1.0 / dim as f64);
            for i in 0..dim {
                let (lo, hi, periodic) = ranges[i];
                let x = center[i] + len * dir[i] / norm / unit[i];
                v[i] = if periodic { x } else { x.clamp(lo, hi) };
            }
        }
    }
    for v in &mut out {
        chart.normalize(v);
    }
    out
}

/// Draws of a degenerate triangle before it is reported as skipped.
const DRAWS: u64 = 4;

fn audit_triangle(probe: &Probe, index: usize, window: [f64; 2], seed: u64, cfg: &AuditConfig) -> TriangleRecord {
    let mut record = draw_triangle(probe.clone(), index, 0, window, seed, cfg);
    for attempt in 1..DRAWS {
        if !record.note.as_deref().is_some_and(|n| n.starts_with("degenerate")) {
            break;
        }
        record = draw_triangle(probe.clone(), index, attempt, window, seed, cfg);
    }
    record
}

fn draw_triangle(
    probe: Probe,
    index: usize,
    attempt: u64,
    window: [f64; 2],
    seed: u64,
    cfg: &AuditConfig,
) -> TriangleRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + (attempt << 32));
    let s = cfg.settings();
    let v = draw_vertices(&probe, window, cfg, &mut rng);
    let piece_of = |p: &PointCoord| match p {
        PointCoord::Piece { piece, .. } => Some(*piece),
        _ => None,
    };
    let vertices: Vec<PointCoord> = v.iter().filter_map(|c| probe.point(c).ok()).collect();
    let tri = ChartTriangle::new(probe, v.clone(), &s);
    let lengths = tri.lengths();
    let diameter = lengths.iter().cloned().fold(0.0, f64::max);
    let lt = cfg.solver.length_tol.max(1e-9);

    // Spot checks on the vertex pairs.
    let back: Vec<f64> = (0..3).map(|i| tri.probe.distance(&v[(i + 1) % 3], &v[i], &s)).collect();
    let symmetry_ok = (0..3).all(|i| (back[i] - lengths[i]).abs() <= 2.0 * lt * lengths[i].max(1.0));
    let triangle_inequality_ok =
        (0..3).all(|i| lengths[i] <= lengths[(i + 1) % 3] + lengths[(i + 2) % 3] + 3.0 * lt * diameter.max(1.0));

    let (slack, note) = match tri.slack(&s) {
        Ok(x) => (Some(x), None),
        Err(e) => (None, Some(e.to_string())),
    };
    TriangleRecord {
        index,
        piece: vertices.first().and_then(piece_of),
        vertices,
        side_lengths: lengths,
        diameter,
        slack,
        symmetry_ok,
        triangle_inequality_ok,
        note,
    }
}

/// Sample `n_triangles` triangles, compare each with its Euclidean
/// comparison triangle and run the structural checks that apply.
pub fn run_audit(space: &SpaceDescriptor, n_triangles: usize, seed: u64, cfg: &AuditConfig) -> Result<AuditReport> {
    cfg.validate()?;
    space.validate()?;
    let window = cfg.solver.net.window;
    let quotient = space.as_quotient()?;
    let glued = quotient.clone().map(Glued::new).transpose()?;

    let probes: Vec<Probe> = match &glued {
        None => vec![Probe::for_space(space)?],
        Some(g) => (0..g.n_pieces()).map(|i| Probe::for_piece(g, i)).collect(),
    };
    let triangles: Vec<TriangleRecord> = (0..n_triangles)
        .into_par_iter()
        .map(|i| {
            let probe = &probes[i % probes.len()];
            let w = match &glued {
                Some(g) => g.space.pieces[i % probes.len()].window.unwrap_or(window),
                None => window,
            };
            audit_triangle(probe, i, w, seed, cfg)
        })
        .collect();

    let slacks: Vec<f64> = triangles.iter().filter_map(|t| t.slack).collect();
    let mut report = AuditReport {
        space_id: space_id(space),
        n_triangles,
        n_evaluated: slacks.len(),
        n_skipped: n_triangles - slacks.len(),
        max_cat0_violation: slacks.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        n_violations: slacks.iter().filter(|s| **s > cfg.tol).count(),
        n_symmetry_failures: triangles.iter().filter(|t| !t.symmetry_ok).count(),
        n_triangle_inequality_failures: triangles.iter().filter(|t| !t.triangle_inequality_ok).count(),
        collars: Vec::new(),
        convexity: Vec::new(),
        net: None,
        identifications: Vec::new(),
        seed,
        tol: cfg.tol,
        radius: cfg.radius,
        large_triangles: cfg.large_triangles,
        triangles,
    };
    if report.n_evaluated == 0 {
        report.max_cat0_violation = 0.0;
    }

    if let (Some(q), Some(g)) = (quotient, glued) {
        report.identifications = g.pairing_deviation(1e-3, 32, seed, window);
        let mut metric = QuotientMetric::new(&q, &cfg.solver)?;
        report.net = Some(net_axioms(&metric, cfg.net_triples, seed)?);
        if !q.collars.is_empty() {
            report.collars = check_collars(&mut metric, &q.collars, cfg.collar_samples, seed, window)?;
        }
        for m in &q.marks {
            report.convexity.push(convexity_on_net(
                &mut metric,
                &Subspace::Slice(m.slice.clone()),
                &m.name,
                cfg.convexity_pairs,
                seed,
                cfg,
            )?);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::hyperbolic_oracle;
    use crate::warp::WarpVector;

    fn plane() -> SpaceDescriptor {
        SpaceDescriptor::product(vec![SpaceDescriptor::Line, SpaceDescriptor::Line])
    }

    #[test]
    fn balls_stay_below_the_systole() {
        // Radius 0.5 on a unit circle would wrap; the cap keeps balls small.
        let r = run_audit(&SpaceDescriptor::circle(1.0), 20, 1, &AuditConfig::default()).unwrap();
        assert!(r.triangles.iter().all(|t| t.diameter <= 0.25 + 1e-12));
        assert_eq!(r.n_violations, 0);
    }

    #[test]
    fn flat_triangle_has_zero_slack() {
        let cfg = AuditConfig::default();
        let v = [PointCoord::tuple([0.0, 0.0]), PointCoord::tuple([1.0, 0.0]), PointCoord::tuple([0.3, 0.8])];
        let tri = TriangleSample::new(&plane(), v, &cfg).unwrap();
        let s = cat0_check(&plane(), &tri, &cfg).unwrap();
        assert!(s.abs() < 1e-12, "{s}");
        assert_eq!(tri.side_lengths()[0], 1.0);
    }

    #[test]
    fn collinear_triangle_is_degenerate() {
        let cfg = AuditConfig::default();
        let v = [PointCoord::tuple([0.0, 0.0]), PointCoord::tuple([1.0, 0.0]), PointCoord::tuple([2.0, 0.0])];
        let tri = TriangleSample::new(&plane(), v, &cfg).unwrap();
        assert!(matches!(cat0_check(&plane(), &tri, &cfg), Err(Error::Degenerate(_))));
    }

    #[test]
    fn circle_third_points_violate() {
        let c = SpaceDescriptor::circle(1.0);
        let cfg = AuditConfig::default();
        let v = [PointCoord::Real(0.0), PointCoord::Real(1.0 / 3.0), PointCoord::Real(2.0 / 3.0)];
        let tri = TriangleSample::new(&c, v, &cfg).unwrap();
        let s = cat0_check(&c, &tri, &cfg).unwrap();
        // Vertex 0 against the midpoint of the opposite side alone gives this.
        let vertex_pair = 0.5 - 3f64.sqrt() / 6.0;
        assert!(s >= vertex_pair - 1e-12, "{s} vs {vertex_pair}");
    }

    #[test]
    fn hyperbolic_triangle_is_thin() {
        let lambda = std::f64::consts::E;
        let space = SpaceDescriptor::warped(SpaceDescriptor::Line, WarpVector::single("e", lambda).unwrap());
        let cfg = AuditConfig::default();
        let pts = [(0.0, 0.0), (0.8, 0.1), (0.2, 0.7)];
        let v = pts.map(|(x, t)| PointCoord::warped(PointCoord::Real(x), vec![t]));
        let tri = TriangleSample::new(&space, v, &cfg).unwrap();
        for (i, l) in tri.side_lengths().iter().enumerate() {
            let exact = hyperbolic_oracle(lambda, pts[i], pts[(i + 1) % 3]).unwrap();
            assert!((l - exact).abs() < 1e-4 * exact, "side {i}: {l} vs {exact}");
        }
        assert!(cat0_check(&space, &tri, &cfg).unwrap() < 0.0);
    }

    #[test]
    fn reports_are_reproducible() {
        let cfg = AuditConfig::default();
        let a = run_audit(&plane(), 12, 7, &cfg).unwrap();
        let b = run_audit(&plane(), 12, 7, &cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.passed(), "{a:?}");
        assert_eq!(a.to_csv().unwrap().lines().count(), 13);
    }

    #[test]
    fn large_circle_triangles_fail() {
        let cfg = AuditConfig {
            large_triangles: true,
            ..AuditConfig::default()
        };
        let r = run_audit(&SpaceDescriptor::circle(1.0), 10, 1, &cfg).unwrap();
        assert!(r.n_violations > 0);
        assert!(!r.passed());
    }
}
