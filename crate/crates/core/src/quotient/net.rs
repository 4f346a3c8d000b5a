use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use petgraph::algo::{astar, dijkstra};
use petgraph::graph::{NodeIndex, UnGraph};
use petgraph::visit::EdgeRef;
use rayon::prelude::*;
use serde::Serialize;

use super::{edge_settings, Glued, Identification, Piece, QuotientSpace, POINT_TOL};
use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::geodesic::{solve_chart, GeodesicResult, Settings, SolverConfig};
use crate::metric::{FlatPoint, PointCoord, PolyPath};

/// Hard cap on net size; beyond this the pairwise edge search is too slow.
pub const MAX_NET_NODES: usize = 20_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetNode {
    pub piece: usize,
    pub coords: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Intra,
    Identification,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NetEdge {
    pub weight: f64,
    pub kind: EdgeKind,
}

/// Heap key ordering floats by `total_cmp`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Total(f64);

impl Eq for Total {}

impl PartialOrd for Total {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Total {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Finite weighted graph approximating a quotient metric.
#[derive(Clone, Debug)]
pub struct NetGraph {
    pub epsilon: f64,
    pub radius: f64,
    graph: UnGraph<NetNode, NetEdge>,
    index: HashMap<(usize, Vec<i64>), NodeIndex>,
}

#[derive(Serialize)]
struct ExportNode<'a> {
    id: usize,
    piece: usize,
    coords: &'a [f64],
    neighbors: Vec<(usize, f64)>,
}

#[derive(Serialize)]
struct Export<'a> {
    epsilon: f64,
    radius: f64,
    nodes: Vec<ExportNode<'a>>,
    edges: Vec<ExportEdge>,
}

#[derive(Serialize)]
struct ExportEdge {
    a: usize,
    b: usize,
    weight: f64,
    kind: EdgeKind,
}

impl NetGraph {
    fn empty(epsilon: f64, radius: f64) -> Self {
        NetGraph {
            epsilon,
            radius,
            graph: UnGraph::default(),
            index: HashMap::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    pub fn node(&self, i: usize) -> &NetNode {
        &self.graph[NodeIndex::new(i)]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NetNode> + '_ {
        self.graph.node_weights()
    }

    /// Edges as (a, b, edge) triples.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, NetEdge)> + '_ {
        self.graph
            .edge_references()
            .map(|e| (e.source().index(), e.target().index(), *e.weight()))
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, NetEdge)> + '_ {
        self.graph
            .edges(NodeIndex::new(i))
            .map(move |e| {
                let other = if e.source().index() == i { e.target() } else { e.source() };
                (other.index(), *e.weight())
            })
    }

    pub fn find(&self, piece: usize, coords: &[f64]) -> Option<usize> {
        self.index.get(&key(piece, coords)).map(|n| n.index())
    }

    /// Shortest-path distances from `i` to every node (∞ if unreachable).
    pub fn distances_from(&self, i: usize) -> Vec<f64> {
        let map = dijkstra(&self.graph, NodeIndex::new(i), None, |e| e.weight().weight);
        let mut out = vec![f64::INFINITY; self.node_count()];
        for (n, d) in map {
            out[n.index()] = d;
        }
        out
    }

    /// Distances to the nearest seed, each seed starting at its own offset.
    pub fn distances_from_seeds(&self, seeds: &[(usize, f64)]) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.node_count()];
        let mut heap = BinaryHeap::new();
        for &(i, d) in seeds {
            if d < dist[i] {
                dist[i] = d;
                heap.push(Reverse((Total(d), i)));
            }
        }
        while let Some(Reverse((Total(d), i))) = heap.pop() {
            if d > dist[i] {
                continue;
            }
            for (j, e) in self.neighbors(i) {
                let nd = d + e.weight;
                if nd < dist[j] {
                    dist[j] = nd;
                    heap.push(Reverse((Total(nd), j)));
                }
            }
        }
        dist
    }

    /// Shortest path as a node sequence.
    ///
    /// The search always runs from the smaller index so that swapping the
    /// endpoints gives bit-identical lengths.
    pub fn shortest_path(&self, a: usize, b: usize) -> Result<(f64, Vec<usize>)> {
        let (from, to) = (a.min(b), a.max(b));
        let goal = NodeIndex::new(to);
        let (d, mut nodes): (f64, Vec<usize>) =
            astar(&self.graph, NodeIndex::new(from), |n| n == goal, |e| e.weight().weight, |_| 0.0)
                .map(|(d, nodes)| (d, nodes.into_iter().map(|n| n.index()).collect()))
                .ok_or(Error::Disconnected)?;
        if from != a {
            nodes.reverse();
        }
        Ok((d, nodes))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let nodes = self
            .graph
            .node_indices()
            .map(|n| {
                let node = &self.graph[n];
                let mut neighbors: Vec<(usize, f64)> =
                    self.neighbors(n.index()).map(|(m, e)| (m, e.weight)).collect();
                neighbors.sort_by_key(|x| x.0);
                ExportNode {
                    id: n.index(),
                    piece: node.piece,
                    coords: &node.coords,
                    neighbors,
                }
            })
            .collect();
        let edges = self
            .edges()
            .map(|(a, b, e)| ExportEdge {
                a,
                b,
                weight: e.weight,
                kind: e.kind,
            })
            .collect();
        serde_json::to_value(Export {
            epsilon: self.epsilon,
            radius: self.radius,
            nodes,
            edges,
        })
        .expect("net export is plain data")
    }

    fn add_node(&mut self, piece: usize, coords: Vec<f64>) -> (usize, bool) {
        let k = key(piece, &coords);
        if let Some(n) = self.index.get(&k) {
            return (n.index(), false);
        }
        let n = self.graph.add_node(NetNode { piece, coords });
        self.index.insert(k, n);
        (n.index(), true)
    }

    fn add_edge(&mut self, a: usize, b: usize, weight: f64, kind: EdgeKind) {
        if a == b {
            return;
        }
        let (na, nb) = (NodeIndex::new(a), NodeIndex::new(b));
        match self.graph.find_edge(na, nb) {
            Some(e) => {
                let w = &mut self.graph[e];
                if weight < w.weight {
                    *w = NetEdge { weight, kind };
                }
            }
            None => {
                self.graph.add_edge(na, nb, NetEdge { weight, kind });
            }
        }
    }
}

fn key(piece: usize, coords: &[f64]) -> (usize, Vec<i64>) {
    (piece, coords.iter().map(|x| (x / POINT_TOL).round() as i64).collect())
}

/// Evenly spaced samples of [lo, hi] at spacing at most `step` (half-open
/// for circles).
fn axis_samples(lo: f64, hi: f64, periodic: bool, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step - 1e-9).ceil().max(1.0) as usize;
    let h = (hi - lo) / n as f64;
    let count = if periodic { n } else { n + 1 };
    (0..count)
        .map(|i| if !periodic && i == n { hi } else { lo + i as f64 * h })
        .collect()
}

fn grid(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for samples in axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                samples.iter().map(move |x| {
                    let mut p = p.clone();
                    p.push(*x);
                    p
                })
            })
            .collect();
    }
    out
}

/// Number of grid nodes the net of `space` would start from at `cfg`'s ε,
/// before identification samples are added.
pub fn grid_size(space: &QuotientSpace, cfg: &SolverConfig) -> Result<usize> {
    let glued = Glued::new(space.clone())?;
    let eps = cfg.net.epsilon;
    let mut total = 0usize;
    for piece in 0..glued.n_pieces() {
        let window = glued.window(piece, cfg.net.window);
        let mut count = 1usize;
        for ((lo, hi, periodic), ax) in window.iter().zip(glued.chart(piece).axes()) {
            if !(hi > lo) {
                return Err(Error::EmptyWindow(glued.space.pieces[piece].name.clone()));
            }
            count = count.saturating_mul(axis_samples(*lo, *hi, *periodic, eps / ax.scale).len());
        }
        total = total.saturating_add(count);
    }
    Ok(total)
}

/// Smallest ε of the form `cfg ε · 2^k` whose grid has at most `budget` nodes.
pub fn fit_epsilon(space: &QuotientSpace, cfg: &SolverConfig, budget: usize) -> Result<f64> {
    let mut c = cfg.clone();
    for _ in 0..64 {
        if grid_size(space, &c)? <= budget {
            return Ok(c.net.epsilon);
        }
        c.net.epsilon *= 2.0;
    }
    Err(Error::NetTooLarge(budget))
}

/// A quotient space together with its ε-net, ready for distance queries.
#[derive(Clone, Debug)]
pub struct QuotientMetric {
    glued: Glued,
    net: NetGraph,
    edge: Settings,
}

impl QuotientMetric {
    pub fn new(space: &QuotientSpace, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let glued = Glued::new(space.clone())?;
        let eps = cfg.net.epsilon;
        let mut net = NetGraph::empty(eps, cfg.net.radius_factor * eps);

        let mut per_piece_axes = Vec::new();
        let mut total = 0usize;
        for piece in 0..glued.n_pieces() {
            let chart = glued.chart(piece);
            let window = glued.window(piece, cfg.net.window);
            let mut axes = Vec::new();
            for ((lo, hi, periodic), ax) in window.iter().zip(chart.axes()) {
                if !(hi > lo) {
                    return Err(Error::EmptyWindow(glued.space.pieces[piece].name.clone()));
                }
                axes.push(axis_samples(*lo, *hi, *periodic, eps / ax.scale));
            }
            total += axes.iter().map(Vec::len).product::<usize>();
            per_piece_axes.push(axes);
        }
        if total > MAX_NET_NODES {
            return Err(Error::NetTooLarge(total));
        }
        for (piece, axes) in per_piece_axes.iter().enumerate() {
            for mut c in grid(axes) {
                glued.chart(piece).normalize(&mut c);
                net.add_node(piece, c);
            }
        }

        // Slice samples on both sides of every identification.
        let mut pairs: Vec<(FlatPoint, FlatPoint)> = Vec::new();
        for id in &glued.space.identifications {
            let before = pairs.len();
            for side in [&id.source, &id.target] {
                let chart = glued.chart(side.piece);
                let free = side.free_axes(chart.dim());
                let axes: Vec<Vec<f64>> = free.iter().map(|&i| per_piece_axes[side.piece][i].clone()).collect();
                for params in grid(&axes) {
                    let p = side.embed(chart, &params);
                    for q in partners_within(&glued, id, (side.piece, &p), cfg.net.window) {
                        pairs.push(((side.piece, p.clone()), q));
                    }
                }
            }
            if pairs.len() == before {
                return Err(Error::ChartOutsideWindow(id.label.clone()));
            }
        }
        for ((pa, a), (pb, b)) in pairs {
            let (ia, _) = net.add_node(pa, a);
            let (ib, _) = net.add_node(pb, b);
            net.add_edge(ia, ib, 0.0, EdgeKind::Identification);
        }
        if net.node_count() > MAX_NET_NODES {
            return Err(Error::NetTooLarge(net.node_count()));
        }

        let mut metric = QuotientMetric {
            glued,
            net,
            edge: edge_settings(cfg),
        };
        let candidates = metric.candidate_pairs(0..metric.net.node_count(), None);
        metric.add_intra_edges(candidates);
        Ok(metric)
    }

    pub fn net(&self) -> &NetGraph {
        &self.net
    }

    pub fn glued(&self) -> &Glued {
        &self.glued
    }

    pub fn space(&self) -> &QuotientSpace {
        &self.glued.space
    }

    pub(crate) fn edge_settings(&self) -> Settings {
        self.edge
    }

    /// Add a point (and its glued partners) to the net; returns its node.
    pub fn insert(&mut self, p: &PointCoord) -> Result<usize> {
        let (piece, coords) = self.glued.flatten_point(p)?;
        self.insert_flat(piece, coords)
    }

    pub fn insert_flat(&mut self, piece: usize, coords: Vec<f64>) -> Result<usize> {
        let partners = self.glued.partners((piece, &coords));
        let (i, fresh) = self.net.add_node(piece, coords);
        let mut new_nodes = if fresh { vec![i] } else { Vec::new() };
        for (pc, c) in partners {
            let (j, fresh_j) = self.net.add_node(pc, c);
            self.net.add_edge(i, j, 0.0, EdgeKind::Identification);
            if fresh_j {
                new_nodes.push(j);
            }
        }
        for &n in &new_nodes {
            let pairs = self.candidate_pairs(0..self.net.node_count(), Some(n));
            self.add_intra_edges(pairs);
        }
        Ok(i)
    }

    /// Net distance between two points, inserting them if needed.
    pub fn distance(&mut self, p: &PointCoord, q: &PointCoord) -> Result<f64> {
        let (a, b) = self.insert_pair(p, q)?;
        quotient_distance(&self.net, a, b)
    }

    /// Shortest net path, spliced into a path of the quotient.
    pub fn geodesic(&mut self, p: &PointCoord, q: &PointCoord) -> Result<GeodesicResult> {
        let (a, b) = self.insert_pair(p, q)?;
        let (length, nodes) = self.net.shortest_path(a, b)?;
        self.result_from_nodes(length, &nodes)
    }

    /// Insert both points and join every pair of their representatives that
    /// share a piece by the direct piece distance, so a query is never
    /// longer than its one-hop chains.
    fn insert_pair(&mut self, p: &PointCoord, q: &PointCoord) -> Result<(usize, usize)> {
        let a = self.insert(p)?;
        let b = self.insert(q)?;
        let reps = |i: usize| -> Vec<usize> {
            std::iter::once(i)
                .chain(
                    self.net
                        .neighbors(i)
                        .filter(|(_, e)| e.kind == EdgeKind::Identification)
                        .map(|(j, _)| j),
                )
                .collect()
        };
        let mut pairs = Vec::new();
        for u in reps(a) {
            for v in reps(b) {
                if u != v && self.net.node(u).piece == self.net.node(v).piece {
                    pairs.push((u.min(v), u.max(v)));
                }
            }
        }
        self.add_intra_edges(pairs);
        Ok((a, b))
    }

    pub fn node_path_result(&self, a: usize, b: usize) -> Result<GeodesicResult> {
        let (length, nodes) = self.net.shortest_path(a, b)?;
        self.result_from_nodes(length, &nodes)
    }

    fn result_from_nodes(&self, length: f64, nodes: &[usize]) -> Result<GeodesicResult> {
        let mut waypoints = Vec::new();
        let first = self.net.node(nodes[0]);
        waypoints.push(self.glued.unflatten_point(first.piece, &first.coords)?);
        for w in nodes.windows(2) {
            let (u, v) = (self.net.node(w[0]), self.net.node(w[1]));
            if u.piece == v.piece && !self.glued.identified((u.piece, &u.coords), (v.piece, &v.coords)) {
                let chart = self.glued.chart(u.piece);
                if !chart.is_flat() {
                    let sol = solve_chart(chart, &u.coords, &v.coords, &self.edge);
                    let inner = &sol.coords[1..sol.coords.len() - 1];
                    for c in inner {
                        waypoints.push(self.glued.unflatten_point(u.piece, c)?);
                    }
                }
            }
            waypoints.push(self.glued.unflatten_point(v.piece, &v.coords)?);
        }
        if waypoints.len() == 1 {
            waypoints.push(waypoints[0].clone());
        }
        Ok(GeodesicResult {
            length,
            path: PolyPath::uniform(waypoints)?,
            converged: true,
            restarts_used: 0,
            net_epsilon: Some(self.net.epsilon),
        })
    }

    /// Node pairs in one piece within the edge radius.  With `only`, just the
    /// pairs involving that node.
    fn candidate_pairs(&self, range: std::ops::Range<usize>, only: Option<usize>) -> Vec<(usize, usize)> {
        let r = self.net.radius + POINT_TOL;
        let mut by_piece: Vec<Vec<usize>> = vec![Vec::new(); self.glued.n_pieces()];
        for i in range {
            by_piece[self.net.node(i).piece].push(i);
        }
        let mut out = Vec::new();
        let close = |chart: &Chart, a: usize, b: usize| {
            chart.coordinate_distance(&self.net.node(a).coords, &self.net.node(b).coords) <= r
        };
        match only {
            Some(n) => {
                let piece = self.net.node(n).piece;
                let chart = self.glued.chart(piece);
                for &m in &by_piece[piece] {
                    if m != n && close(chart, n, m) {
                        out.push((n.min(m), n.max(m)));
                    }
                }
            }
            None => {
                for (piece, nodes) in by_piece.iter().enumerate() {
                    let chart = self.glued.chart(piece);
                    for (k, &a) in nodes.iter().enumerate() {
                        for &b in &nodes[k + 1..] {
                            if close(chart, a, b) {
                                out.push((a, b));
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn add_intra_edges(&mut self, pairs: Vec<(usize, usize)>) {
        let weights: Vec<f64> = pairs
            .par_iter()
            .map(|&(a, b)| {
                let (na, nb) = (self.net.node(a), self.net.node(b));
                self.glued.piece_distance(na.piece, &na.coords, &nb.coords, &self.edge)
            })
            .collect();
        for ((a, b), w) in pairs.into_iter().zip(weights) {
            self.net.add_edge(a, b, w, EdgeKind::Intra);
        }
    }
}

/// Partners of `p` under one identification that fall inside the sampling
/// window of their piece.
fn partners_within(glued: &Glued, id: &Identification, p: (usize, &[f64]), default: [f64; 2]) -> Vec<FlatPoint> {
    let single = Glued {
        space: QuotientSpace::new(glued.space.pieces.clone(), vec![id.clone()]),
        charts: glued.charts.clone(),
    };
    single
        .partners(p)
        .into_iter()
        .filter(|(piece, c)| {
            glued
                .window(*piece, default)
                .iter()
                .zip(c)
                .all(|((lo, hi, periodic), x)| *periodic || (*x >= lo - POINT_TOL && *x <= hi + POINT_TOL))
        })
        .collect()
}

/// Build the ε-net of a quotient given by its pieces and identifications.
pub fn build_net(pieces: &[Piece], identifications: &[Identification], epsilon: f64) -> Result<NetGraph> {
    let mut cfg = SolverConfig::default();
    cfg.net.epsilon = epsilon;
    let space = QuotientSpace::new(pieces.to_vec(), identifications.to_vec());
    Ok(QuotientMetric::new(&space, &cfg)?.net)
}

/// Graph distance between two net nodes.
pub fn quotient_distance(net: &NetGraph, p: usize, q: usize) -> Result<f64> {
    if p >= net.node_count() || q >= net.node_count() {
        return Err(Error::InvalidDescriptor("node index out of range".into()));
    }
    let (p, q) = (p.min(q), p.max(q));
    let goal = NodeIndex::new(q);
    let map = dijkstra(&net.graph, NodeIndex::new(p), Some(goal), |e| e.weight().weight);
    map.get(&goal).copied().ok_or(Error::Disconnected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::SpaceDescriptor;
    use crate::quotient::SliceChart;

    fn unit_piece(name: &str) -> Piece {
        Piece {
            name: name.into(),
            space: SpaceDescriptor::interval(0.0, 1.0),
            window: None,
        }
    }

    #[test]
    fn interval_path_graph() {
        let net = build_net(&[unit_piece("I")], &[], 0.1).unwrap();
        assert_eq!(net.node_count(), 11);
        // Radius 3ε joins each node to up to three neighbours on each side.
        assert!(net.edges().all(|(_, _, e)| e.kind == EdgeKind::Intra));
        let a = net.find(0, &[0.1]).unwrap();
        let b = net.find(0, &[0.9]).unwrap();
        assert!((quotient_distance(&net, a, b).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn seeded_distances_take_the_nearest_seed() {
        let net = build_net(&[unit_piece("I")], &[], 0.1).unwrap();
        let (a, b) = (net.find(0, &[0.0]).unwrap(), net.find(0, &[1.0]).unwrap());
        let d = net.distances_from_seeds(&[(a, 0.0), (b, 0.25)]);
        let x = |c: f64| d[net.find(0, &[c]).unwrap()];
        assert!((x(0.3) - 0.3).abs() < 1e-12);
        assert!((x(0.8) - 0.45).abs() < 1e-12);
        assert_eq!(x(1.0), 0.25);
    }

    #[test]
    fn epsilon_doubles_until_the_grid_fits() {
        let space = QuotientSpace::new(vec![unit_piece("I")], vec![]);
        let cfg = SolverConfig::default();
        assert_eq!(grid_size(&space, &cfg).unwrap(), 11);
        assert_eq!(fit_epsilon(&space, &cfg, 11).unwrap(), 0.1);
        assert_eq!(fit_epsilon(&space, &cfg, 4).unwrap(), 0.4);
    }

    #[test]
    fn interval_circle_and_concatenation() {
        let ends = Identification {
            label: "ends".into(),
            source: SliceChart::new(0, vec![(0, 0.0)]),
            target: SliceChart::new(0, vec![(0, 1.0)]),
            pairing: vec![],
        };
        let net = build_net(&[unit_piece("I")], &[ends], 0.1).unwrap();
        let a = net.find(0, &[0.1]).unwrap();
        let b = net.find(0, &[0.9]).unwrap();
        assert!((quotient_distance(&net, a, b).unwrap() - 0.2).abs() < 1e-12);
        assert!(net.edges().any(|(_, _, e)| e.kind == EdgeKind::Identification && e.weight == 0.0));

        let glue = Identification {
            label: "glue".into(),
            source: SliceChart::new(0, vec![(0, 1.0)]),
            target: SliceChart::new(1, vec![(0, 0.0)]),
            pairing: vec![],
        };
        let net = build_net(&[unit_piece("A"), unit_piece("B")], &[glue], 0.1).unwrap();
        let a = net.find(0, &[0.0]).unwrap();
        let b = net.find(1, &[1.0]).unwrap();
        assert!((quotient_distance(&net, a, b).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_and_oversized_windows() {
        let line = Piece {
            name: "L".into(),
            space: SpaceDescriptor::Line,
            window: Some([1.0, 1.0]),
        };
        assert!(build_net(&[line], &[], 0.1).is_err());
        let big = Piece {
            name: "P".into(),
            space: SpaceDescriptor::product(vec![SpaceDescriptor::Line, SpaceDescriptor::Line]),
            window: Some([-100.0, 100.0]),
        };
        assert!(matches!(build_net(&[big], &[], 0.1), Err(Error::NetTooLarge(_))));
    }

    #[test]
    fn spacing_respects_scale() {
        assert_eq!(axis_samples(0.0, 1.0, false, 0.1).len(), 11);
        assert_eq!(axis_samples(0.0, 1.0, true, 0.1).len(), 10);
        assert_eq!(axis_samples(0.0, 0.5, false, 0.3).len(), 3);
    }
}
