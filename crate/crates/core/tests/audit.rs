use warpspace::audit::{run_audit, AuditConfig};
use warpspace::{SpaceDescriptor, WarpVector};

fn hyperbolic(lambda: f64) -> SpaceDescriptor {
    SpaceDescriptor::warped(SpaceDescriptor::Line, WarpVector::single("e", lambda).unwrap())
}

#[test]
fn flat_products_are_comparison_equalities() {
    let cfg = AuditConfig::default();
    for space in [
        SpaceDescriptor::product(vec![SpaceDescriptor::Line, SpaceDescriptor::Line]),
        SpaceDescriptor::product(vec![SpaceDescriptor::interval(0.0, 2.0), SpaceDescriptor::Line, SpaceDescriptor::Line]),
    ] {
        let r = run_audit(&space, 100, 3, &cfg).unwrap();
        assert_eq!(r.n_evaluated, 100);
        for t in &r.triangles {
            if let Some(s) = t.slack {
                assert!(s.abs() <= 1e-4, "triangle {}: slack {s}", t.index);
            }
        }
        assert!(r.passed());
    }
}

#[test]
fn warped_plane_triangles_are_thin() {
    let cfg = AuditConfig::default();
    let r = run_audit(&hyperbolic(2.0), 100, 5, &cfg).unwrap();
    assert!(r.n_evaluated >= 90, "{} evaluated", r.n_evaluated);
    let mut big = 0;
    let mut closest: f64 = f64::NEG_INFINITY;
    for t in &r.triangles {
        let Some(s) = t.slack else { continue };
        assert!(s <= 1e-4, "triangle {}: slack {s}", t.index);
        if t.diameter >= 0.5 {
            big += 1;
            closest = closest.max(s);
            assert!(s < 0.0, "triangle {} sides {:?}: slack {s}", t.index, t.side_lengths);
        }
    }
    eprintln!("{big} triangles of diameter >= 0.5, largest slack among them {closest:.3e}, max {:.3e}", r.max_cat0_violation);
    assert!(big > 10);
    assert!(r.passed());
}

#[test]
fn large_circle_triangles_are_caught() {
    let cfg = AuditConfig {
        large_triangles: true,
        ..AuditConfig::default()
    };
    let r = run_audit(&SpaceDescriptor::circle(1.0), 20, 9, &cfg).unwrap();
    assert!(r.n_violations >= 1);
    assert!(!r.passed());
}

#[test]
fn fixed_seed_reports_are_identical() {
    let cfg = AuditConfig::default();
    let a = run_audit(&hyperbolic(0.5), 10, 42, &cfg).unwrap();
    let b = run_audit(&hyperbolic(0.5), 10, 42, &cfg).unwrap();
    assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
    assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
}
