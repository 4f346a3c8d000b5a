use std::path::PathBuf;

use proptest::prelude::*;
use warpspace::audit::net_axioms;
use warpspace::complexes::{
    build_extended_cylinder, build_multiwarp_space, certify_gluing, check_collars, check_straight_collars,
    GluingKind,
};
use warpspace::groups::{circle_cover, realize_graph_of_groups, serre_presentation, GraphOfGroupsSpec};
use warpspace::quotient::{AxisMap, MapDescriptor, QuotientMetric};
use warpspace::{Error, SolverConfig, SpaceDescriptor};

fn load(name: &str) -> GraphOfGroupsSpec {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../specs").join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Coarse net settings for the multiwarped spaces.
fn coarse() -> SolverConfig {
    let mut cfg = SolverConfig::default();
    cfg.net.epsilon = 0.5;
    cfg.net.window = [-1.0, 1.0];
    cfg
}

#[test]
fn baumslag_solitar_pipeline() {
    for (file, text) in [("bs12.json", "⟨a, t | t a t^-1 = a^2⟩"), ("bs23.json", "⟨a, t | t a^2 t^-1 = a^3⟩")] {
        let r = realize_graph_of_groups(&load(file)).unwrap();
        assert_eq!(r.presentation.to_string(), text);
        let q = r.multiwarp.space.as_quotient().unwrap().unwrap();
        assert!(q.collars.len() >= 2);
        let cfg = coarse();
        let mut metric = QuotientMetric::new(&q, &cfg).unwrap();
        let axioms = net_axioms(&metric, 100, 1).unwrap();
        assert!(axioms.passed, "{file}: {axioms:?}");
        let collars = check_collars(&mut metric, &q.collars, 10, 2, cfg.net.window).unwrap();
        for c in &collars {
            assert!(c.passed, "{file}: {c:?}");
        }
    }
}

#[test]
fn trefoil_presentation() {
    let p = serre_presentation(&load("trefoil.json")).unwrap();
    assert_eq!(p.to_string(), "⟨a, b | a^2 = b^3⟩");
}

#[test]
fn circle_covers_certify() {
    for k in [1i64, -1, 2, -2, 3, -3] {
        let cert = certify_gluing(&circle_cover(k).unwrap()).unwrap();
        let eps = 1.0 / (4.0 * k.abs() as f64);
        if k.abs() == 1 {
            assert_eq!(cert.kind, GluingKind::BijectiveLocalIsometry);
        } else {
            assert_eq!(cert.kind, GluingKind::SeparatedCover);
            assert!((cert.fiber_separation.unwrap() - eps).abs() < 1e-12);
        }
        assert!(cert.check_fiber_separation(eps * 0.999).unwrap());
        cert.validate().unwrap();
    }
}

#[test]
fn doubling_into_an_unscaled_circle_is_rejected() {
    let c = SpaceDescriptor::circle(1.0);
    let map = MapDescriptor::new(
        c.clone(),
        c,
        vec![AxisMap::CircleCover {
            degree: 2,
            domain: 1.0,
            codomain: 1.0,
        }],
    )
    .unwrap();
    assert!(matches!(certify_gluing(&map), Err(Error::CertificationFailed(_))));
}

#[test]
fn certified_cylinders_have_straight_collars() {
    let mut cfg = SolverConfig::default();
    cfg.net.epsilon = 0.05;
    for k in [1i64, 2, -3] {
        let cert = certify_gluing(&circle_cover(k).unwrap()).unwrap();
        let cyl = build_extended_cylinder(&cert).unwrap();
        for r in check_straight_collars(&cyl, 0.05, 20, &cfg).unwrap() {
            assert!(r.passed, "k={k}: {r:?}");
        }
    }
}

#[test]
fn multiwarp_pairings_are_isometric() {
    let y = build_multiwarp_space(&load("bs23.json").to_spaces()).unwrap();
    let q = y.space.as_quotient().unwrap().unwrap();
    let glued = warpspace::quotient::Glued::new(q).unwrap();
    for (label, dev) in glued.pairing_deviation(1e-3, 32, 7, [-1.0, 1.0]) {
        assert!(dev <= 1e-9, "{label}: {dev}");
    }
}

fn bs_spec(m: i64, n: i64) -> GraphOfGroupsSpec {
    serde_json::from_value(serde_json::json!({
        "vertices": [{ "id": "a" }],
        "edges": [
            { "id": "t", "bar": "tb", "origin": "a", "k": m },
            { "id": "tb", "bar": "t", "origin": "a", "k": n }
        ]
    }))
    .unwrap()
}

/// A connected graph: a path through `n_vertices` vertices plus extra loops.
fn random_graph(n_vertices: usize, extra: Vec<(usize, usize)>, ks: Vec<i64>) -> GraphOfGroupsSpec {
    let mut pairs: Vec<(usize, usize)> = (1..n_vertices).map(|i| (i - 1, i)).collect();
    pairs.extend(extra.into_iter().map(|(a, b)| (a % n_vertices, b % n_vertices)));
    let mut edges = Vec::new();
    for (i, (a, b)) in pairs.iter().enumerate() {
        let k = |j: usize| ks[j % ks.len()];
        edges.push(serde_json::json!({ "id": format!("e{i}"), "bar": format!("e{i}b"), "origin": format!("v{a}"), "k": k(2 * i) }));
        edges.push(serde_json::json!({ "id": format!("e{i}b"), "bar": format!("e{i}"), "origin": format!("v{b}"), "k": k(2 * i + 1) }));
    }
    let vertices: Vec<_> = (0..n_vertices).map(|i| serde_json::json!({ "id": format!("v{i}") })).collect();
    serde_json::from_value(serde_json::json!({ "vertices": vertices, "edges": edges })).unwrap()
}

fn nonzero() -> impl Strategy<Value = i64> {
    prop_oneof![-5i64..=-1, 1i64..=5]
}

proptest! {
    #[test]
    fn presentation_counts(
        n in 1usize..5,
        extra in proptest::collection::vec((0usize..5, 0usize..5), 0..4),
        ks in proptest::collection::vec(nonzero(), 1..6),
    ) {
        let spec = random_graph(n, extra.clone(), ks);
        let p = serre_presentation(&spec).unwrap();
        let n_pairs = n - 1 + extra.len();
        prop_assert_eq!(p.relations.len(), n_pairs);
        // |V| generators plus one stable letter per pair outside the tree.
        prop_assert_eq!(p.generators.len(), n + n_pairs - (n - 1));
    }

    #[test]
    fn baumslag_solitar_shape(m in nonzero(), n in nonzero()) {
        let p = serre_presentation(&bs_spec(m, n)).unwrap();
        prop_assert_eq!(p.generators.clone(), vec!["a".to_string(), "t".to_string()]);
        prop_assert_eq!(p.relations.len(), 1);
        let r = &p.relations[0];
        let lhs: Vec<(String, i64)> = r.lhs.iter().map(|s| (s.generator.clone(), s.power)).collect();
        prop_assert_eq!(lhs, vec![("t".to_string(), 1), ("a".to_string(), m), ("t".to_string(), -1)]);
        prop_assert_eq!(r.rhs.len(), 1);
        prop_assert_eq!((r.rhs[0].generator.as_str(), r.rhs[0].power), ("a", n));
    }

    #[test]
    fn cover_certificates_validate(k in nonzero(), f in 0.1..0.999f64) {
        let cert = certify_gluing(&circle_cover(k).unwrap()).unwrap();
        cert.validate().unwrap();
        prop_assert!(cert.check_fiber_separation(f / (4.0 * k.abs() as f64)).unwrap());
    }
}
