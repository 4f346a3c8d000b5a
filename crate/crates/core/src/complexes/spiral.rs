use super::{build_extended_cylinder, GluingCertificate};
use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::metric::SpaceDescriptor;
use crate::quotient::{AxisMap, Glued, Identification, SliceChart};
use crate::warp::WarpVector;

/// The spiral built from f: λY → Y.  The warped cylinder C(f) ×_λ ℝ has its
/// bottom X×{0}×{t} glued to the top Y×{2}×{t+1}, which is an isometry
/// exactly when X = λY.
pub fn build_spiral(cert: &GluingCertificate, lambda: f64) -> Result<SpaceDescriptor> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::LambdaMismatch(format!("lambda must be positive, got {lambda}")));
    }
    let dom = &cert.map.domain;
    let cod = &cert.map.codomain;
    let matches = match dom {
        SpaceDescriptor::Scaled { factor, inner } => (factor - lambda).abs() <= 1e-12 * lambda && **inner == *cod,
        d => lambda == 1.0 && d == cod,
    };
    if !matches {
        return Err(Error::LambdaMismatch(format!(
            "domain must be the codomain scaled by {lambda}"
        )));
    }
    let cyl = build_extended_cylinder(cert)?;
    let warp = WarpVector::single("t", lambda)?;
    let mut q = cyl.quotient.warped(&warp);
    let hx = Chart::new(dom)?.dim();
    let hy = Chart::new(cod)?.dim();
    let mut pairing = vec![AxisMap::Identity; hx];
    pairing.push(AxisMap::Affine { scale: 1.0, offset: 1.0 });
    q.identifications.push(Identification {
        label: "spiral: (x,0,t) ~ (x,2,t+1)".into(),
        source: SliceChart::new(0, vec![(hx, 0.0)]),
        target: SliceChart::new(1, vec![(hy, 2.0)]),
        pairing,
    });
    q.marks.clear();
    q.collars.clear();
    q.claims.push("the spiral is locally CAT(0) when Y is".into());
    let glued = Glued::new(q.clone())?;
    for (label, dev) in glued.pairing_deviation(1e-3, 64, 0x5b, [-1.0, 1.0]) {
        if dev > 1e-9 {
            return Err(Error::CertificationFailed(format!("`{label}` distorts lengths by {dev:.3e}")));
        }
    }
    Ok(SpaceDescriptor::Quotient(Box::new(q)))
}
