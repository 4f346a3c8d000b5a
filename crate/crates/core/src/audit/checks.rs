use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::probe::{Probe, ChartPath};
use super::AuditConfig;
use crate::chart::{wrap, AxisKind, Chart};
use crate::error::{Error, Result};
use crate::metric::SpaceDescriptor;
use crate::quotient::{quotient_distance, EdgeKind, MapDescriptor, QuotientMetric, SliceChart};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsometryReport {
    pub passed: bool,
    pub max_deviation: f64,
    pub n_pairs: usize,
}

/// Sampling range of each axis: bounded axes use their bounds, unbounded
/// ones the window.
pub(crate) fn axis_ranges(chart: &Chart, window: [f64; 2]) -> Vec<(f64, f64, bool)> {
    chart
        .axes()
        .iter()
        .map(|ax| match ax.kind {
            AxisKind::Interval { a, b } => (a, b, false),
            AxisKind::Circle { circumference } => (0.0, circumference, true),
            AxisKind::Line | AxisKind::Fiber => (window[0], window[1], false),
        })
        .collect()
}

/// Compare domain and image distances of `n_samples` pairs at most `r` apart.
pub fn local_isometry_check(
    map: &MapDescriptor,
    window: Option<[f64; 2]>,
    r: f64,
    n_samples: usize,
    tol: f64,
    seed: u64,
) -> Result<IsometryReport> {
    map.validate()?;
    if !(r > 0.0 && tol > 0.0) {
        return Err(Error::InvalidDescriptor("radius and tolerance must be positive".into()));
    }
    let dom = Chart::new(&map.domain)?;
    let cod = Chart::new(&map.codomain)?;
    if !dom.is_flat() || !cod.is_flat() {
        return Err(Error::Unsupported("local isometry checks need flat charts".into()));
    }
    let ranges = axis_ranges(&dom, window.unwrap_or([-2.0, 2.0]));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_dev: f64 = 0.0;
    let mut n_pairs = 0;
    for _ in 0..n_samples {
        let x: Vec<f64> = ranges.iter().map(|(lo, hi, _)| rng.random_range(*lo..*hi)).collect();
        let dir: Vec<f64> = (0..dom.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-12);
        let len = r * rng.random_range(0.05..1.0);
        let mut y: Vec<f64> = x
            .iter()
            .zip(&dir)
            .zip(dom.axes())
            .zip(&ranges)
            .map(|(((x, d), ax), (lo, hi, periodic))| {
                let v = x + len * d / norm / ax.scale;
                if *periodic {
                    v
                } else {
                    v.clamp(*lo, *hi)
                }
            })
            .collect();
        dom.normalize(&mut y);
        let d_dom = dom.base_distance(&x, &y);
        if d_dom <= 1e-12 {
            continue;
        }
        let d_cod = cod.base_distance(&map.apply(&x), &map.apply(&y));
        max_dev = max_dev.max((d_cod - d_dom).abs() / d_dom);
        n_pairs += 1;
    }
    Ok(IsometryReport {
        passed: max_dev <= tol,
        max_deviation: max_dev,
        n_pairs,
    })
}

/// Subspaces that can be sampled and measured against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Subspace {
    /// Coordinate box, one [lo, hi] per chart axis (of `piece` in a quotient).
    Box {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        piece: Option<usize>,
        bounds: Vec<[f64; 2]>,
    },
    /// Arc [lo, hi] of a circle, in circle coordinates.
    Arc { lo: f64, hi: f64 },
    /// A slice of a quotient piece, such as a boundary mark.
    Slice(SliceChart),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub name: String,
    pub n_pairs: usize,
    pub n_nonconverged: usize,
    pub max_deviation: f64,
    pub tol: f64,
    pub convex: bool,
}

const PATH_PROBES: usize = 8;

fn box_deviation(chart: &Chart, bounds: &[[f64; 2]], c: &[f64]) -> f64 {
    chart
        .axes()
        .iter()
        .zip(bounds)
        .zip(c)
        .map(|((ax, [lo, hi]), x)| {
            let out = if x < lo {
                lo - x
            } else if x > hi {
                x - hi
            } else {
                0.0
            };
            (out * ax.scale).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

fn arc_deviation(c: f64, lo: f64, hi: f64, x: f64) -> f64 {
    let rel = (x - lo).rem_euclid(c);
    if rel <= hi - lo {
        0.0
    } else {
        (rel - (hi - lo)).min(c - rel)
    }
}

fn slice_deviation(chart: &Chart, slice: &SliceChart, c: &[f64]) -> f64 {
    slice
        .fixed
        .iter()
        .map(|(axis, v)| {
            let ax = &chart.axes()[*axis];
            let d = match ax.circumference() {
                Some(circ) => wrap(c[*axis] - v, circ),
                None => c[*axis] - v,
            };
            (d * ax.scale).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// Points densely along a chart path.
fn probe_points(path: &ChartPath) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for w in path.coords.windows(2) {
        for k in 0..PATH_PROBES {
            let tau = k as f64 / PATH_PROBES as f64;
            out.push(w[0].iter().zip(&w[1]).map(|(a, b)| a + tau * (b - a)).collect());
        }
    }
    out.push(path.coords.last().expect("nonempty").clone());
    out
}

/// Sample pairs in `sub`, join them by geodesics and measure how far the
/// geodesics leave `sub`.
pub fn convexity_check(
    space: &SpaceDescriptor,
    sub: &Subspace,
    n_pairs: usize,
    seed: u64,
    cfg: &AuditConfig,
) -> Result<ConvexityReport> {
    cfg.validate()?;
    match space.as_quotient()? {
        Some(q) => {
            let mut metric = QuotientMetric::new(&q, &cfg.solver)?;
            let SubspaceName(name) = SubspaceName::of(sub);
            convexity_on_net(&mut metric, sub, &name, n_pairs, seed, cfg)
        }
        None => convexity_on_chart(space, sub, n_pairs, seed, cfg),
    }
}

struct SubspaceName(String);

impl SubspaceName {
    fn of(sub: &Subspace) -> Self {
        SubspaceName(match sub {
            Subspace::Box { .. } => "box".into(),
            Subspace::Arc { lo, hi } => format!("arc [{lo}, {hi}]"),
            Subspace::Slice(s) => format!("slice of piece {}", s.piece),
        })
    }
}

fn sample_in(chart: &Chart, sub: &Subspace, ranges: &[(f64, f64, bool)], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    Ok(match sub {
        Subspace::Box { bounds, .. } => {
            if bounds.len() != chart.dim() {
                return Err(Error::shape(format!("{} box bounds", chart.dim()), bounds.len().to_string()));
            }
            // Unbounded directions are sampled inside the window.
            bounds
                .iter()
                .zip(ranges)
                .map(|([lo, hi], (wl, wh, _))| rng.random_range(lo.max(*wl)..=hi.min(*wh)))
                .collect()
        }
        Subspace::Arc { lo, hi } => {
            if chart.dim() != 1 || chart.axes()[0].circumference().is_none() {
                return Err(Error::Unsupported("arcs live in circles".into()));
            }
            let mut c = vec![rng.random_range(*lo..=*hi)];
            chart.normalize(&mut c);
            c
        }
        Subspace::Slice(slice) => {
            let free = slice.free_axes(chart.dim());
            let params: Vec<f64> = free.iter().map(|&i| rng.random_range(ranges[i].0..ranges[i].1)).collect();
            slice.embed(chart, &params)
        }
    })
}

fn deviation(chart: &Chart, sub: &Subspace, c: &[f64]) -> f64 {
    match sub {
        Subspace::Box { bounds, .. } => box_deviation(chart, bounds, c),
        Subspace::Arc { lo, hi } => {
            let ax = &chart.axes()[0];
            arc_deviation(ax.circumference().expect("checked"), *lo, *hi, c[0]) * ax.scale
        }
        Subspace::Slice(slice) => slice_deviation(chart, slice, c),
    }
}

fn convexity_on_chart(
    space: &SpaceDescriptor,
    sub: &Subspace,
    n_pairs: usize,
    seed: u64,
    cfg: &AuditConfig,
) -> Result<ConvexityReport> {
    let probe = Probe::for_space(space)?;
    let ranges = axis_ranges(&probe.chart, cfg.solver.net.window);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let settings = cfg.settings();
    let mut max_dev: f64 = 0.0;
    let mut nonconverged = 0;
    for _ in 0..n_pairs {
        let a = sample_in(&probe.chart, sub, &ranges, &mut rng)?;
        let b = sample_in(&probe.chart, sub, &ranges, &mut rng)?;
        let path = probe.path(&a, &b, &settings);
        if !path.converged {
            nonconverged += 1;
            continue;
        }
        for c in probe_points(&path) {
            let mut c = c;
            probe.chart.normalize(&mut c);
            max_dev = max_dev.max(deviation(&probe.chart, sub, &c));
        }
    }
    let tol = cfg.tol;
    Ok(ConvexityReport {
        name: SubspaceName::of(sub).0,
        n_pairs,
        n_nonconverged: nonconverged,
        max_deviation: max_dev,
        tol,
        convex: max_dev <= tol,
    })
}

/// Convexity of a slice or piece box in a quotient, measured along net
/// shortest paths; a point counts as close if any of its representatives is.
pub(crate) fn convexity_on_net(
    metric: &mut QuotientMetric,
    sub: &Subspace,
    name: &str,
    n_pairs: usize,
    seed: u64,
    cfg: &AuditConfig,
) -> Result<ConvexityReport> {
    let piece = match sub {
        Subspace::Slice(s) => s.piece,
        Subspace::Box { piece: Some(p), .. } => *p,
        _ => return Err(Error::Unsupported("quotient convexity needs a piece slice or box".into())),
    };
    let chart = metric.glued().chart(piece).clone();
    let ranges = metric.glued().window(piece, cfg.solver.net.window);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = metric.net().epsilon;
    let mut ends = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        // Nearby pairs: the second point is a short hop from the first.
        let a = sample_in(&chart, sub, &ranges, &mut rng)?;
        let mut b = a.clone();
        for _ in 0..8 {
            let cand = sample_in(&chart, sub, &ranges, &mut rng)?;
            if chart.coordinate_distance(&a, &cand) <= 4.0 * eps {
                b = cand;
                break;
            }
        }
        ends.push((metric.insert_flat(piece, a)?, metric.insert_flat(piece, b)?));
    }
    // Distance of every node to the subspace: nodes of the piece start at
    // their chart deviation and the rest are reached through the net.
    let net = metric.net();
    let seeds: Vec<(usize, f64)> = (0..net.node_count())
        .filter_map(|i| {
            let node = net.node(i);
            let mut reps = vec![(node.piece, node.coords.clone())];
            reps.extend(metric.glued().partners((node.piece, &node.coords)));
            let dev = reps
                .iter()
                .filter(|(p, _)| *p == piece)
                .map(|(_, c)| deviation(&chart, sub, c))
                .fold(f64::INFINITY, f64::min);
            dev.is_finite().then_some((i, dev))
        })
        .collect();
    let to_sub = net.distances_from_seeds(&seeds);
    let mut max_dev: f64 = 0.0;
    for (ia, ib) in ends {
        let (_, nodes) = net.shortest_path(ia, ib)?;
        for n in nodes {
            max_dev = max_dev.max(to_sub[n]);
        }
    }
    // Net paths are resolved only to the grid spacing.
    let tol = eps;
    Ok(ConvexityReport {
        name: name.into(),
        n_pairs,
        n_nonconverged: 0,
        max_deviation: max_dev,
        tol,
        convex: max_dev <= tol,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetAxiomReport {
    pub n_nodes: usize,
    pub n_triples: usize,
    pub symmetry_failures: usize,
    pub triangle_failures: usize,
    pub n_identified_pairs: usize,
    pub max_identified_distance: f64,
    pub passed: bool,
}

const NET_REL_TOL: f64 = 1e-12;

/// Pseudometric axioms of the net graph on random node triples, plus zero
/// distance across every identification edge.
pub fn net_axioms(metric: &QuotientMetric, n_triples: usize, seed: u64) -> Result<NetAxiomReport> {
    let net = metric.net();
    let n = net.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sym = 0;
    let mut tri = 0;
    let close = |x: f64, y: f64| (x - y).abs() <= NET_REL_TOL * x.abs().max(y.abs()).max(1.0);
    for _ in 0..n_triples {
        let (a, b, c) = (rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n));
        let from_a = net.distances_from(a);
        let from_b = net.distances_from(b);
        let (ab, ba) = (from_a[b], from_b[a]);
        if ab.is_finite() != ba.is_finite() || (ab.is_finite() && !close(ab, ba)) {
            sym += 1;
        }
        let (ac, bc) = (from_a[c], from_b[c]);
        if ab.is_finite() && bc.is_finite() && ac > ab + bc + NET_REL_TOL * (ab + bc).max(1.0) {
            tri += 1;
        }
    }
    let ident: Vec<(usize, usize)> = net
        .edges()
        .filter(|(_, _, e)| e.kind == EdgeKind::Identification)
        .map(|(a, b, _)| (a, b))
        .collect();
    let step = (ident.len() / 200).max(1);
    let mut max_id: f64 = 0.0;
    let mut checked = 0;
    for &(a, b) in ident.iter().step_by(step) {
        max_id = max_id.max(quotient_distance(net, a, b)?);
        checked += 1;
    }
    Ok(NetAxiomReport {
        n_nodes: n,
        n_triples,
        symmetry_failures: sym,
        triangle_failures: tri,
        n_identified_pairs: checked,
        max_identified_distance: max_id,
        passed: sym == 0 && tri == 0 && max_id == 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quotient::AxisMap;
    use crate::warp::WarpVector;

    #[test]
    fn doubling_into_rescaled_circle_is_isometric() {
        let good = MapDescriptor::new(
            SpaceDescriptor::circle(1.0),
            SpaceDescriptor::scaled(0.5, SpaceDescriptor::circle(1.0)),
            vec![AxisMap::CircleCover {
                degree: 2,
                domain: 1.0,
                codomain: 1.0,
            }],
        )
        .unwrap();
        let r = local_isometry_check(&good, None, 0.1, 200, 1e-9, 1).unwrap();
        assert!(r.passed, "{r:?}");

        let bad = MapDescriptor {
            codomain: SpaceDescriptor::circle(1.0),
            ..good
        };
        let r = local_isometry_check(&bad, None, 0.1, 200, 1e-9, 1).unwrap();
        assert!(!r.passed);
        assert!((r.max_deviation - 1.0).abs() < 1e-9);
        let id = MapDescriptor::identity(SpaceDescriptor::interval(0.0, 1.0)).unwrap();
        assert_eq!(local_isometry_check(&id, None, 0.1, 50, 1e-9, 1).unwrap().max_deviation, 0.0);
    }

    #[test]
    fn arc_distance() {
        assert_eq!(arc_deviation(1.0, 0.0, 0.6, 0.3), 0.0);
        assert!((arc_deviation(1.0, 0.0, 0.6, 0.8) - 0.2).abs() < 1e-12);
        assert!((arc_deviation(1.0, 0.0, 0.6, 0.95) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn convexity_examples() {
        let cfg = AuditConfig::default();
        let line_interval = Subspace::Box {
            piece: None,
            bounds: vec![[0.0, 1.0]],
        };
        let r = convexity_check(&SpaceDescriptor::Line, &line_interval, 20, 3, &cfg).unwrap();
        assert!(r.convex && r.max_deviation == 0.0);

        let strip = SpaceDescriptor::warped(SpaceDescriptor::Line, WarpVector::single("e", 2.0).unwrap());
        let sub = Subspace::Box {
            piece: None,
            bounds: vec![[0.0, 1.0], [-1e9, 1e9]],
        };
        let r = convexity_check(&strip, &sub, 8, 3, &cfg).unwrap();
        assert!(r.convex, "{r:?}");

        let arc = Subspace::Arc { lo: 0.0, hi: 0.7 };
        let r = convexity_check(&SpaceDescriptor::circle(1.0), &arc, 40, 3, &cfg).unwrap();
        assert!(!r.convex);
    }
}
