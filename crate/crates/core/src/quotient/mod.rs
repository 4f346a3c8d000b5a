//! Quotient pseudometrics of glued pieces, computed on ε-nets.

pub mod maps;
mod net;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chart::{wrap, AxisKind, Chart};
use crate::error::{Error, Result};
use crate::geodesic::{solve_chart, GeodesicResult, Settings, SolverConfig};
use crate::metric::{FlatPoint, PointCoord, SpaceDescriptor};
use crate::warp::WarpVector;

pub use maps::{AxisMap, MapDescriptor};
pub use net::{build_net, fit_epsilon, grid_size, quotient_distance, EdgeKind, NetEdge, NetGraph, NetNode, QuotientMetric};

/// Coordinates closer than this are treated as the same point.
pub(crate) const POINT_TOL: f64 = 1e-9;

/// One glued piece and its sampling window on unbounded axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub name: String,
    pub space: SpaceDescriptor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
}

/// A subspace of a piece obtained by freezing some chart coordinates; the
/// remaining coordinates, in axis order, are the chart parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceChart {
    pub piece: usize,
    #[serde(default)]
    pub fixed: Vec<(usize, f64)>,
}

impl SliceChart {
    pub fn new(piece: usize, fixed: Vec<(usize, f64)>) -> Self {
        SliceChart { piece, fixed }
    }

    pub fn free_axes(&self, dim: usize) -> Vec<usize> {
        (0..dim).filter(|i| self.fixed.iter().all(|(a, _)| a != i)).collect()
    }

    pub fn contains(&self, chart: &Chart, piece: usize, coords: &[f64]) -> bool {
        piece == self.piece
            && self.fixed.iter().all(|(axis, v)| {
                let d = coords[*axis] - v;
                let d = match chart.axes()[*axis].circumference() {
                    Some(c) => wrap(d, c),
                    None => d,
                };
                d.abs() <= POINT_TOL
            })
    }

    pub fn params(&self, chart: &Chart, coords: &[f64]) -> Vec<f64> {
        self.free_axes(chart.dim()).iter().map(|&i| coords[i]).collect()
    }

    pub fn embed(&self, chart: &Chart, params: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; chart.dim()];
        for (axis, v) in &self.fixed {
            out[*axis] = *v;
        }
        for (&i, p) in self.free_axes(chart.dim()).iter().zip(params) {
            out[i] = *p;
        }
        chart.normalize(&mut out);
        out
    }
}

/// Gluing datum: the pairing carries source chart parameters onto target
/// chart parameters, one axis map per parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Identification {
    pub label: String,
    pub source: SliceChart,
    pub target: SliceChart,
    pub pairing: Vec<AxisMap>,
}

/// A named subspace recorded on a construction (boundary copies and the like).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mark {
    pub name: String,
    pub slice: SliceChart,
    /// Extra facts about the subspace, e.g. its scale relative to a vertex space.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

/// A boundary neighbourhood {boundary ≤ h ≤ boundary + width} (or the mirror
/// image when `inward` is negative) that should be isometric to `reference`
/// in the same chart coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollarSpec {
    pub name: String,
    pub piece: usize,
    pub axis: usize,
    pub boundary: f64,
    pub inward: f64,
    pub width: f64,
    pub reference: SpaceDescriptor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuotientSpace {
    pub pieces: Vec<Piece>,
    #[serde(default)]
    pub identifications: Vec<Identification>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub marks: Vec<Mark>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub collars: Vec<CollarSpec>,
    /// Statements recorded about the construction but not verified.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub claims: Vec<String>,
}

impl QuotientSpace {
    pub fn new(pieces: Vec<Piece>, identifications: Vec<Identification>) -> Self {
        QuotientSpace {
            pieces,
            identifications,
            marks: Vec::new(),
            collars: Vec::new(),
            claims: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pieces.is_empty() {
            return Err(Error::InvalidDescriptor("quotient with no pieces".into()));
        }
        let charts = self
            .pieces
            .iter()
            .map(|p| {
                p.space.validate()?;
                if !p.space.is_single_chart() {
                    return Err(Error::Unsupported(format!(
                        "piece `{}` must be a single-chart space",
                        p.name
                    )));
                }
                if let Some([lo, hi]) = p.window {
                    if !(lo < hi) {
                        return Err(Error::EmptyWindow(p.name.clone()));
                    }
                }
                Chart::new(&p.space)
            })
            .collect::<Result<Vec<_>>>()?;
        let check_slice = |s: &SliceChart, what: &str| -> Result<usize> {
            let chart = charts
                .get(s.piece)
                .ok_or_else(|| Error::InvalidDescriptor(format!("{what}: no piece {}", s.piece)))?;
            for (i, (axis, v)) in s.fixed.iter().enumerate() {
                let ax = chart.axes().get(*axis).ok_or_else(|| {
                    Error::InvalidDescriptor(format!("{what}: no axis {axis} in piece {}", s.piece))
                })?;
                let (lo, hi) = ax.bounds();
                if !(v.is_finite() && *v >= lo - POINT_TOL && *v <= hi + POINT_TOL) {
                    return Err(Error::InvalidDescriptor(format!(
                        "{what}: fixed value {v} outside axis {axis}"
                    )));
                }
                if s.fixed[..i].iter().any(|(a, _)| a == axis) {
                    return Err(Error::InvalidDescriptor(format!("{what}: axis {axis} fixed twice")));
                }
            }
            Ok(chart.dim() - s.fixed.len())
        };
        for id in &self.identifications {
            let ns = check_slice(&id.source, &id.label)?;
            let nt = check_slice(&id.target, &id.label)?;
            if ns != id.pairing.len() || nt != id.pairing.len() {
                return Err(Error::shape(
                    format!("{} chart parameters on both sides of `{}`", id.pairing.len(), id.label),
                    format!("{ns} and {nt}"),
                ));
            }
            id.pairing.iter().try_for_each(AxisMap::validate)?;
        }
        for m in &self.marks {
            check_slice(&m.slice, &m.name)?;
        }
        for c in &self.collars {
            let chart = charts
                .get(c.piece)
                .ok_or_else(|| Error::InvalidDescriptor(format!("collar {}: no piece", c.name)))?;
            if c.axis >= chart.dim() || !(c.width > 0.0) {
                return Err(Error::InvalidDescriptor(format!("collar {} malformed", c.name)));
            }
            if Chart::new(&c.reference)?.dim() != chart.dim() {
                return Err(Error::shape(
                    format!("collar reference of dimension {}", chart.dim()),
                    c.name.clone(),
                ));
            }
        }
        Ok(())
    }

    /// The quotient of the warped pieces X_i ×_λ ℝ^E, glued fiberwise.
    pub fn warped(&self, warp: &WarpVector) -> QuotientSpace {
        let mut q = self.clone();
        for p in &mut q.pieces {
            p.space = SpaceDescriptor::warped(p.space.clone(), warp.clone());
        }
        for id in &mut q.identifications {
            id.pairing.extend(std::iter::repeat_n(AxisMap::Identity, warp.len()));
        }
        for c in &mut q.collars {
            c.reference = SpaceDescriptor::warped(c.reference.clone(), warp.clone());
        }
        q
    }

    pub fn scaled(&self, factor: f64) -> QuotientSpace {
        let mut q = self.clone();
        for p in &mut q.pieces {
            p.space = SpaceDescriptor::scaled(factor, p.space.clone());
        }
        for c in &mut q.collars {
            c.reference = SpaceDescriptor::scaled(factor, c.reference.clone());
        }
        q
    }

    pub fn piece_index(&self, name: &str) -> Option<usize> {
        self.pieces.iter().position(|p| p.name == name)
    }

    pub fn mark(&self, name: &str) -> Option<&Mark> {
        self.marks.iter().find(|m| m.name == name)
    }
}

/// A validated quotient with compiled piece charts.
#[derive(Clone, Debug)]
pub struct Glued {
    pub space: QuotientSpace,
    charts: Vec<Chart>,
}

impl Glued {
    pub fn new(space: QuotientSpace) -> Result<Self> {
        space.validate()?;
        let charts = space
            .pieces
            .iter()
            .map(|p| Chart::new(&p.space))
            .collect::<Result<_>>()?;
        Ok(Glued { space, charts })
    }

    pub fn chart(&self, piece: usize) -> &Chart {
        &self.charts[piece]
    }

    pub fn n_pieces(&self) -> usize {
        self.charts.len()
    }

    pub fn flatten_point(&self, p: &PointCoord) -> Result<FlatPoint> {
        let PointCoord::Piece { piece, coord } = p else {
            return Err(Error::shape("piece-tagged point {piece, coord}", format!("{p:?}")));
        };
        let piece_desc = self
            .space
            .pieces
            .get(*piece)
            .ok_or_else(|| Error::InvalidDescriptor(format!("no piece {piece}")))?;
        let mut c = piece_desc.space.flatten(coord)?;
        self.charts[*piece].normalize(&mut c);
        Ok((*piece, c))
    }

    pub fn unflatten_point(&self, piece: usize, coords: &[f64]) -> Result<PointCoord> {
        let mut c = coords.to_vec();
        self.charts[piece].normalize(&mut c);
        Ok(PointCoord::piece(piece, self.space.pieces[piece].space.unflatten(&c)?))
    }

    pub fn same_point(&self, a: (usize, &[f64]), b: (usize, &[f64])) -> bool {
        a.0 == b.0 && self.charts[a.0].coordinate_distance(a.1, b.1) <= POINT_TOL
    }

    /// Points glued to `p` by a single identification.
    pub fn partners(&self, p: (usize, &[f64])) -> Vec<FlatPoint> {
        let (piece, coords) = p;
        let mut out = Vec::new();
        for id in &self.space.identifications {
            let sc = &self.charts[id.source.piece];
            let tc = &self.charts[id.target.piece];
            if id.source.contains(sc, piece, coords) {
                let params = id.source.params(sc, coords);
                let image: Vec<f64> = id.pairing.iter().zip(&params).map(|(m, x)| m.apply(*x)).collect();
                let q = id.target.embed(tc, &image);
                if in_bounds(tc, &q) {
                    out.push((id.target.piece, q));
                }
            }
            if id.target.contains(tc, piece, coords) {
                let params = id.target.params(tc, coords);
                let mut combos = vec![Vec::new()];
                for (m, y) in id.pairing.iter().zip(&params) {
                    let xs = m.preimages(*y);
                    combos = combos
                        .into_iter()
                        .flat_map(|c| {
                            xs.iter().map(move |x| {
                                let mut c = c.clone();
                                c.push(*x);
                                c
                            })
                        })
                        .collect();
                }
                for c in combos {
                    let q = id.source.embed(sc, &c);
                    if in_bounds(sc, &q) {
                        out.push((id.source.piece, q));
                    }
                }
            }
        }
        out.retain(|(pc, c)| !self.same_point((piece, coords), (*pc, c)));
        out
    }

    pub fn identified(&self, a: (usize, &[f64]), b: (usize, &[f64])) -> bool {
        self.same_point(a, b)
            || self
                .partners(a)
                .iter()
                .any(|(pc, c)| self.same_point((*pc, c), b))
    }

    /// Sampling bounds of each axis of a piece.
    pub(crate) fn window(&self, piece: usize, default: [f64; 2]) -> Vec<(f64, f64, bool)> {
        let w = self.space.pieces[piece].window.unwrap_or(default);
        self.charts[piece]
            .axes()
            .iter()
            .map(|ax| match ax.kind {
                AxisKind::Interval { a, b } => (a, b, false),
                AxisKind::Circle { circumference } => (0.0, circumference, true),
                AxisKind::Line | AxisKind::Fiber => (w[0], w[1], false),
            })
            .collect()
    }

    /// Largest relative change, over sampled short segments of each source
    /// slice, between the segment length and the length of its image.
    pub fn pairing_deviation(&self, r: f64, n: usize, seed: u64, window: [f64; 2]) -> Vec<(String, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.space
            .identifications
            .iter()
            .map(|id| {
                let sc = &self.charts[id.source.piece];
                let tc = &self.charts[id.target.piece];
                let bounds = self.window(id.source.piece, window);
                let free = id.source.free_axes(sc.dim());
                let mut worst: f64 = 0.0;
                for _ in 0..n {
                    let x: Vec<f64> = free.iter().map(|&i| rng.random_range(bounds[i].0..bounds[i].1)).collect();
                    let dir: Vec<f64> = free.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
                    let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-12);
                    let y: Vec<f64> = x
                        .iter()
                        .zip(&dir)
                        .zip(&free)
                        .map(|((x, d), &i)| {
                            let v = x + r * d / norm / sc.axes()[i].scale;
                            if bounds[i].2 {
                                v
                            } else {
                                v.clamp(bounds[i].0, bounds[i].1)
                            }
                        })
                        .collect();
                    let (a, b) = (id.source.embed(sc, &x), id.source.embed(sc, &y));
                    let img = |p: &[f64]| -> Vec<f64> { id.pairing.iter().zip(p).map(|(m, v)| m.apply(*v)).collect() };
                    let (fa, fb) = (id.target.embed(tc, &img(&x)), id.target.embed(tc, &img(&y)));
                    if !in_bounds(tc, &fa) || !in_bounds(tc, &fb) {
                        continue;
                    }
                    let l_src = sc.segment_length(&a, &sc.wrap_delta(&a, &b));
                    let l_img = tc.segment_length(&fa, &tc.wrap_delta(&fa, &fb));
                    if l_src > 0.0 {
                        worst = worst.max((l_img - l_src).abs() / l_src);
                    }
                }
                (id.label.clone(), worst)
            })
            .collect()
    }

    /// Intra-piece distance: closed form on flat pieces, solver otherwise.
    pub(crate) fn piece_distance(&self, piece: usize, a: &[f64], b: &[f64], s: &Settings) -> f64 {
        let chart = &self.charts[piece];
        if chart.is_flat() {
            chart.base_distance(a, b)
        } else {
            solve_chart(chart, a, b, s).length
        }
    }
}

fn in_bounds(chart: &Chart, c: &[f64]) -> bool {
    chart.axes().iter().zip(c).all(|(ax, x)| {
        let (lo, hi) = ax.bounds();
        *x >= lo - POINT_TOL && *x <= hi + POINT_TOL
    })
}

pub(crate) fn edge_settings(cfg: &SolverConfig) -> Settings {
    Settings {
        n_waypoints: cfg.net.edge_waypoints,
        restarts: 0,
        winding: 0,
        ..cfg.settings()
    }
}

/// Shortest path through the net of `space` between two points.
pub fn geodesic(space: &QuotientSpace, p: &PointCoord, q: &PointCoord, cfg: &SolverConfig) -> Result<GeodesicResult> {
    let mut metric = QuotientMetric::new(space, cfg)?;
    metric.geodesic(p, q)
}

/// [0, 1] with its endpoints identified: a circle of length 1.
pub fn interval_circle() -> QuotientSpace {
    QuotientSpace::new(
        vec![Piece {
            name: "I".into(),
            space: SpaceDescriptor::interval(0.0, 1.0),
            window: None,
        }],
        vec![Identification {
            label: "ends".into(),
            source: SliceChart::new(0, vec![(0, 0.0)]),
            target: SliceChart::new(0, vec![(0, 1.0)]),
            pairing: vec![],
        }],
    )
}

/// The unit square with opposite sides identified.
pub fn flat_torus() -> QuotientSpace {
    let side = |label: &str, axis: usize| Identification {
        label: label.into(),
        source: SliceChart::new(0, vec![(axis, 0.0)]),
        target: SliceChart::new(0, vec![(axis, 1.0)]),
        pairing: vec![AxisMap::Identity],
    };
    QuotientSpace::new(
        vec![Piece {
            name: "square".into(),
            space: SpaceDescriptor::product(vec![SpaceDescriptor::interval(0.0, 1.0); 2]),
            window: None,
        }],
        vec![side("x", 0), side("y", 1)],
    )
}

/// Exhaustive chain infimum Σ d(x_i, y_i), y_i ∼ x_{i+1}, over chains of at
/// most `max_chain_len` intra-piece hops whose gluing points come from
/// `samples`.  Independent of the net: every hop is a direct piece distance.
pub fn chain_infimum_bruteforce(
    space: &QuotientSpace,
    p: &PointCoord,
    q: &PointCoord,
    max_chain_len: usize,
    samples: &[PointCoord],
    cfg: &SolverConfig,
) -> Result<f64> {
    let glued = Glued::new(space.clone())?;
    let s = edge_settings(cfg);
    let start = glued.flatten_point(p)?;
    let goal = glued.flatten_point(q)?;
    // Each sample y contributes the jumps y → x' for every x' ∼ y.
    let mut jumps: Vec<(FlatPoint, FlatPoint)> = Vec::new();
    for y in samples {
        let y = glued.flatten_point(y)?;
        for x in glued.partners((y.0, &y.1)) {
            jumps.push((y.clone(), x));
        }
    }

    let mut best = f64::INFINITY;
    let mut stack: Vec<(FlatPoint, usize, f64)> = vec![(start, 0, 0.0)];
    while let Some((x, hops, cost)) = stack.pop() {
        if cost >= best {
            continue;
        }
        if x.0 == goal.0 {
            best = best.min(cost + glued.piece_distance(x.0, &x.1, &goal.1, &s));
        }
        if hops + 1 >= max_chain_len {
            continue;
        }
        for (y, x_next) in &jumps {
            if y.0 != x.0 {
                continue;
            }
            let c = cost + glued.piece_distance(x.0, &x.1, &y.1, &s);
            if c < best {
                stack.push((x_next.clone(), hops + 1, c));
            }
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::Disconnected)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64) -> PointCoord {
        PointCoord::piece(0, PointCoord::Real(x))
    }

    #[test]
    fn partners_of_endpoints() {
        let g = Glued::new(interval_circle()).unwrap();
        assert_eq!(g.partners((0, &[0.0])), vec![(0, vec![1.0])]);
        assert_eq!(g.partners((0, &[1.0])), vec![(0, vec![0.0])]);
        assert!(g.partners((0, &[0.5])).is_empty());
        assert!(g.identified((0, &[0.0]), (0, &[1.0])));
    }

    #[test]
    fn chain_oracle_interval_circle() {
        let samples: Vec<_> = (0..=20).map(|i| pt(i as f64 / 20.0)).collect();
        let cfg = SolverConfig::default();
        let d1 = chain_infimum_bruteforce(&interval_circle(), &pt(0.05), &pt(0.95), 1, &samples, &cfg).unwrap();
        assert!((d1 - 0.9).abs() < 1e-12);
        let d2 = chain_infimum_bruteforce(&interval_circle(), &pt(0.05), &pt(0.95), 2, &samples, &cfg).unwrap();
        assert!((d2 - 0.1).abs() < 1e-12);
    }

    #[test]
    fn validation_catches_bad_slices() {
        let mut q = interval_circle();
        q.identifications[0].target.fixed = vec![(0, 2.0)];
        assert!(q.validate().is_err());
        let mut q = interval_circle();
        q.identifications[0].pairing = vec![AxisMap::Identity];
        assert!(q.validate().is_err());
    }

    #[test]
    fn warping_appends_identity_pairings() {
        let w = WarpVector::single("e", 2.0).unwrap();
        let q = interval_circle().warped(&w);
        assert_eq!(q.identifications[0].pairing, vec![AxisMap::Identity]);
        q.validate().unwrap();
    }
}
