//! Mapping cylinders, gluing certificates and graph-of-spaces constructions.

mod cylinder;
mod graph;
mod spiral;

use serde::{Deserialize, Serialize};

use crate::audit::local_isometry_check;
use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::quotient::MapDescriptor;

pub use cylinder::{
    build_extended_cylinder, build_extended_cylinder_with, build_two_sided_cylinder, check_collars,
    check_straight_collars, CollarReport, CylinderSpace, TwoSidedCylinder, DEFAULT_COLLAR_FRACTION,
};
pub use graph::{
    build_multiwarp_space, build_total_space_combinatorial, CombinatorialComplex, ComplexSummary, EdgeSpec,
    GraphOfSpacesSpec, MultiWarpSpace, VertexSpec,
};
pub use spiral::build_spiral;
pub(crate) use graph::circle_cover_on;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GluingKind {
    BijectiveLocalIsometry,
    SeparatedCover,
}

/// Evidence that a map is one of the two supported nonpositively curved
/// gluings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GluingCertificate {
    pub kind: GluingKind,
    pub map: MapDescriptor,
    /// Radius ε whose balls around distinct fiber points are disjoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiber_separation: Option<f64>,
    /// Largest relative distortion seen by the local isometry sampler.
    pub max_deviation: f64,
}

const CERT_SAMPLES: usize = 400;
const CERT_TOL: f64 = 1e-9;
const CERT_SEED: u64 = 0x5eed;

/// Classify `map` by sampling: bijective local isometries first, then
/// surjective local isometries with well separated fibers.
pub fn certify_gluing(map: &MapDescriptor) -> Result<GluingCertificate> {
    map.validate()?;
    let dom = Chart::new(&map.domain)?;
    let cod = Chart::new(&map.codomain)?;
    if !dom.is_flat() || !cod.is_flat() {
        return Err(Error::Unsupported("gluing maps between warped spaces".into()));
    }
    let r = local_radius(&dom, &cod);
    let report = local_isometry_check(map, None, r, CERT_SAMPLES, CERT_TOL, CERT_SEED)?;
    if !report.passed {
        return Err(Error::CertificationFailed(format!(
            "map is not a local isometry: max relative deviation {:.6} at radius {r}",
            report.max_deviation
        )));
    }
    let samples = codomain_samples(&cod);
    let mut surjective = true;
    let mut injective = true;
    for y in &samples {
        let pre: Vec<Vec<f64>> = map
            .preimages(y)
            .into_iter()
            .filter(|x| inside(&dom, x))
            .collect();
        if pre.is_empty() {
            surjective = false;
        }
        if pre.len() > 1 {
            injective = false;
        }
    }
    if !surjective {
        return Err(Error::CertificationFailed("map is not onto its codomain".into()));
    }
    let cert = if injective {
        GluingCertificate {
            kind: GluingKind::BijectiveLocalIsometry,
            map: map.clone(),
            fiber_separation: None,
            max_deviation: report.max_deviation,
        }
    } else {
        let spacing = map
            .fiber_separation()?
            .ok_or_else(|| Error::CertificationFailed("non-injective map without fiber spacing".into()))?;
        GluingCertificate {
            kind: GluingKind::SeparatedCover,
            map: map.clone(),
            fiber_separation: Some(spacing / 4.0),
            max_deviation: report.max_deviation,
        }
    };
    if let Some(eps) = cert.fiber_separation {
        if !cert.check_fiber_separation(eps)? {
            return Err(Error::CertificationFailed(format!("fibers are not {eps}-separated")));
        }
    }
    Ok(cert)
}

impl GluingCertificate {
    /// True when the ε-balls around distinct points of every sampled fiber
    /// are pairwise disjoint.  Injective maps pass for every ε.
    pub fn check_fiber_separation(&self, eps: f64) -> Result<bool> {
        let dom = Chart::new(&self.map.domain)?;
        let cod = Chart::new(&self.map.codomain)?;
        for y in codomain_samples(&cod) {
            let fiber = self.map.preimages(&y);
            for (i, a) in fiber.iter().enumerate() {
                for b in &fiber[i + 1..] {
                    if dom.base_distance(a, b) <= 2.0 * eps {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    pub fn validate(&self) -> Result<()> {
        let fresh = certify_gluing(&self.map)?;
        if fresh.kind != self.kind {
            return Err(Error::CertificationFailed(format!(
                "certificate claims {:?} but the map is {:?}",
                self.kind, fresh.kind
            )));
        }
        if let Some(eps) = self.fiber_separation {
            if !self.check_fiber_separation(eps)? {
                return Err(Error::CertificationFailed(format!("fibers are not {eps}-separated")));
            }
        }
        Ok(())
    }
}

/// Sampling radius well below every circle's half circumference on both
/// sides of the map.
fn local_radius(dom: &Chart, cod: &Chart) -> f64 {
    dom.axes()
        .iter()
        .chain(cod.axes())
        .filter_map(|a| a.circumference().map(|c| c * a.scale))
        .fold(0.1, |r, c| r.min(0.1 * c))
}

fn codomain_samples(cod: &Chart) -> Vec<Vec<f64>> {
    let per_axis: Vec<Vec<f64>> = cod
        .axes()
        .iter()
        .map(|ax| {
            let (lo, hi) = match (ax.circumference(), ax.bounds()) {
                (Some(c), _) => (0.0, c),
                (None, (lo, hi)) if lo.is_finite() => (lo, hi),
                _ => (-2.0, 2.0),
            };
            let n = if cod.dim() > 2 { 5 } else { 17 };
            (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.37) / n as f64).collect()
        })
        .collect();
    let mut out = vec![Vec::new()];
    for xs in per_axis {
        out = out
            .into_iter()
            .flat_map(|p| {
                xs.iter().map(move |x| {
                    let mut p = p.clone();
                    p.push(*x);
                    p
                })
            })
            .collect();
    }
    out
}

fn inside(chart: &Chart, x: &[f64]) -> bool {
    chart.axes().iter().zip(x).all(|(ax, v)| {
        let (lo, hi) = ax.bounds();
        *v >= lo - 1e-12 && *v <= hi + 1e-12
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::circle_cover;
    use crate::metric::SpaceDescriptor;
    use crate::quotient::AxisMap;

    #[test]
    fn identity_circle_is_bijective() {
        let m = MapDescriptor::identity(SpaceDescriptor::circle(1.0)).unwrap();
        let c = certify_gluing(&m).unwrap();
        assert_eq!(c.kind, GluingKind::BijectiveLocalIsometry);
        assert!(c.check_fiber_separation(0.4).unwrap());
    }

    #[test]
    fn double_cover_is_separated() {
        let c = certify_gluing(&circle_cover(2).unwrap()).unwrap();
        assert_eq!(c.kind, GluingKind::SeparatedCover);
        assert_eq!(c.fiber_separation, Some(0.125));
        assert!(c.check_fiber_separation(0.1).unwrap());
        assert!(!c.check_fiber_separation(0.3).unwrap());
    }

    #[test]
    fn unrescaled_doubling_is_rejected() {
        let m = MapDescriptor::new(
            SpaceDescriptor::circle(1.0),
            SpaceDescriptor::circle(1.0),
            vec![AxisMap::CircleCover {
                degree: 2,
                domain: 1.0,
                codomain: 1.0,
            }],
        )
        .unwrap();
        assert!(matches!(certify_gluing(&m), Err(Error::CertificationFailed(_))));
    }

    #[test]
    fn non_surjective_affine_is_rejected() {
        let m = MapDescriptor::new(
            SpaceDescriptor::interval(0.0, 1.0),
            SpaceDescriptor::interval(0.0, 2.0),
            vec![AxisMap::Identity],
        )
        .unwrap();
        assert!(certify_gluing(&m).is_err());
    }
}
