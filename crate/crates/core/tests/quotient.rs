use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use warpspace::quotient::{
    chain_infimum_bruteforce, flat_torus, interval_circle, quotient_distance, QuotientMetric, QuotientSpace,
};
use warpspace::{PointCoord, SolverConfig};

const EPS: f64 = 0.05;

fn cfg() -> SolverConfig {
    let mut c = SolverConfig::default();
    c.net.epsilon = EPS;
    c
}

fn circle_pt(x: f64) -> PointCoord {
    PointCoord::piece(0, PointCoord::Real(x))
}

fn torus_pt(x: f64, y: f64) -> PointCoord {
    PointCoord::piece(0, PointCoord::tuple([x, y]))
}

/// Gluing-point samples: the circle's two ends, or 50 points on each side of
/// the square.
fn circle_samples() -> Vec<PointCoord> {
    vec![circle_pt(0.0), circle_pt(1.0)]
}

fn torus_samples() -> Vec<PointCoord> {
    let mut out = Vec::new();
    for j in 0..50 {
        let s = j as f64 / 50.0;
        out.extend([torus_pt(0.0, s), torus_pt(1.0, s), torus_pt(s, 0.0), torus_pt(s, 1.0)]);
    }
    out
}

fn arc(d: f64) -> f64 {
    let d = d.abs().rem_euclid(1.0);
    d.min(1.0 - d)
}

fn compare(space: &QuotientSpace, pairs: &[(PointCoord, PointCoord, f64)], samples: &[PointCoord]) {
    assert!(samples.len() <= 200);
    let cfg = cfg();
    let mut metric = QuotientMetric::new(space, &cfg).unwrap();
    for (p, q, exact) in pairs {
        let net = metric.distance(p, q).unwrap();
        let brute = chain_infimum_bruteforce(space, p, q, 3, samples, &cfg).unwrap();
        assert!((net - brute).abs() <= 2.0 * EPS, "{p:?} {q:?}: net {net} brute {brute}");
        assert!((net - exact).abs() <= 2.0 * EPS && (brute - exact).abs() <= 2.0 * EPS);
    }
}

#[test]
fn interval_circle_net_matches_chain_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pairs: Vec<_> = (0..20)
        .map(|_| {
            let (a, b) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            (circle_pt(a), circle_pt(b), arc(a - b))
        })
        .collect();
    compare(&interval_circle(), &pairs, &circle_samples());
}

#[test]
fn flat_torus_net_matches_chain_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pairs: Vec<_> = (0..20)
        .map(|_| {
            let mut c = || rng.random_range(0.0..1.0);
            let (a, b, x, y) = (c(), c(), c(), c());
            (torus_pt(a, b), torus_pt(x, y), arc(a - x).hypot(arc(b - y)))
        })
        .collect();
    compare(&flat_torus(), &pairs, &torus_samples());
}

#[test]
fn gluing_never_increases_distance() {
    let mut metric = QuotientMetric::new(&flat_torus(), &cfg()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..30 {
        let mut c = || rng.random_range(0.0..1.0);
        let (a, b, x, y) = (c(), c(), c(), c());
        let d = metric.distance(&torus_pt(a, b), &torus_pt(x, y)).unwrap();
        assert!(d <= (a - x).hypot(b - y) + 1e-12);
    }
}

#[test]
fn net_graph_is_a_pseudometric() {
    let metric = QuotientMetric::new(&flat_torus(), &cfg()).unwrap();
    let net = metric.net();
    let n = net.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let (i, j, k) = (rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n));
        let d = |a, b| quotient_distance(net, a, b).unwrap();
        assert_eq!(d(i, i), 0.0);
        assert_eq!(d(i, j), d(j, i));
        assert!(d(i, k) <= d(i, j) + d(j, k) + 1e-12);
    }
    // Glued copies of a boundary point are at distance zero.
    let a = net.find(0, &[0.0, 0.5]).unwrap();
    let b = net.find(0, &[1.0, 0.5]).unwrap();
    assert_eq!(quotient_distance(net, a, b).unwrap(), 0.0);
    let corners: Vec<usize> = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]
        .iter()
        .map(|c| net.find(0, c).unwrap())
        .collect();
    for &c in &corners[1..] {
        assert_eq!(quotient_distance(net, corners[0], c).unwrap(), 0.0);
    }
}
