use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{certify_gluing, GluingCertificate, GraphOfSpacesSpec};
use crate::chart::{AxisKind, Chart};
use crate::error::{Error, Result};
use crate::geodesic::{solve_chart, SolverConfig};
use crate::metric::SpaceDescriptor;
use crate::quotient::{
    quotient_distance, AxisMap, CollarSpec, Identification, Mark, Piece, QuotientMetric, QuotientSpace, SliceChart,
};

/// Collar width as a fraction of the piece height ½.
pub const DEFAULT_COLLAR_FRACTION: f64 = 0.125;
const PIECE_HEIGHT: f64 = 0.5;
const COLLAR_TOL: f64 = 1e-6;

/// The extended mapping cylinder C(f) = X×[0,½] ⊔ Y×[3/2,2] / (x,½)∼(f(x),3/2).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderSpace {
    pub domain: SpaceDescriptor,
    pub codomain: SpaceDescriptor,
    pub gluing: GluingCertificate,
    pub collar_width: f64,
    pub quotient: QuotientSpace,
}

pub fn build_extended_cylinder(cert: &GluingCertificate) -> Result<CylinderSpace> {
    build_extended_cylinder_with(cert, DEFAULT_COLLAR_FRACTION * PIECE_HEIGHT)
}

pub fn build_extended_cylinder_with(cert: &GluingCertificate, collar_width: f64) -> Result<CylinderSpace> {
    if !(collar_width > 0.0 && collar_width < 0.5 * PIECE_HEIGHT) {
        return Err(Error::InvalidDescriptor(format!(
            "collar width {collar_width} must lie in (0, {})",
            0.5 * PIECE_HEIGHT
        )));
    }
    cert.validate()?;
    let quotient = cylinder_quotient(cert, "X", "Y", "X_0", "Y_1", collar_width)?;
    Ok(CylinderSpace {
        domain: cert.map.domain.clone(),
        codomain: cert.map.codomain.clone(),
        gluing: cert.clone(),
        collar_width,
        quotient,
    })
}

fn cylinder_quotient(
    cert: &GluingCertificate,
    dom_name: &str,
    cod_name: &str,
    bottom_mark: &str,
    top_mark: &str,
    collar_width: f64,
) -> Result<QuotientSpace> {
    let map = &cert.map;
    let hx = Chart::new(&map.domain)?.dim();
    let hy = Chart::new(&map.codomain)?.dim();
    let lower = SpaceDescriptor::product(vec![map.domain.clone(), SpaceDescriptor::interval(0.0, 0.5)]);
    let upper = SpaceDescriptor::product(vec![map.codomain.clone(), SpaceDescriptor::interval(1.5, 2.0)]);
    let mut q = QuotientSpace::new(
        vec![
            Piece {
                name: format!("{dom_name}x[0,1/2]"),
                space: lower.clone(),
                window: None,
            },
            Piece {
                name: format!("{cod_name}x[3/2,2]"),
                space: upper.clone(),
                window: None,
            },
        ],
        vec![Identification {
            label: format!("seam {dom_name}->{cod_name}"),
            source: SliceChart::new(0, vec![(hx, 0.5)]),
            target: SliceChart::new(1, vec![(hy, 1.5)]),
            pairing: map.axes.clone(),
        }],
    );
    q.marks = vec![
        Mark {
            name: bottom_mark.into(),
            slice: SliceChart::new(0, vec![(hx, 0.0)]),
            scale: None,
        },
        Mark {
            name: top_mark.into(),
            slice: SliceChart::new(1, vec![(hy, 2.0)]),
            scale: None,
        },
    ];
    q.collars = vec![
        CollarSpec {
            name: format!("E_0({bottom_mark})"),
            piece: 0,
            axis: hx,
            boundary: 0.0,
            inward: 1.0,
            width: collar_width,
            reference: lower,
        },
        CollarSpec {
            name: format!("E_1({top_mark})"),
            piece: 1,
            axis: hy,
            boundary: 2.0,
            inward: -1.0,
            width: collar_width,
            reference: upper,
        },
    ];
    Ok(q)
}

/// Append `src` to `dst`, renumbering pieces; returns the piece offset.
pub(crate) fn append(dst: &mut QuotientSpace, src: QuotientSpace) -> usize {
    let off = dst.pieces.len();
    let shift = |s: &mut SliceChart| s.piece += off;
    dst.pieces.extend(src.pieces);
    for mut id in src.identifications {
        shift(&mut id.source);
        shift(&mut id.target);
        dst.identifications.push(id);
    }
    for mut m in src.marks {
        shift(&mut m.slice);
        dst.marks.push(m);
    }
    for mut c in src.collars {
        c.piece += off;
        dst.collars.push(c);
    }
    dst.claims.extend(src.claims);
    off
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollarReport {
    pub name: String,
    pub width: f64,
    pub n_pairs: usize,
    pub max_deviation: f64,
    pub passed: bool,
}

/// Compare quotient-net distances inside each collar against the product
/// reference metric on pairs within `width / 2`.
pub fn check_collars(
    metric: &mut QuotientMetric,
    collars: &[CollarSpec],
    n_samples: usize,
    seed: u64,
    window: [f64; 2],
) -> Result<Vec<CollarReport>> {
    let edge = metric.edge_settings();
    let mut reports = Vec::new();
    for (ci, collar) in collars.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(ci as u64);
        let chart = metric.glued().chart(collar.piece).clone();
        let reference = Chart::new(&collar.reference)?;
        let bounds = metric.glued().window(collar.piece, window);
        let (h_lo, h_hi) = if collar.inward > 0.0 {
            (collar.boundary, collar.boundary + collar.width)
        } else {
            (collar.boundary - collar.width, collar.boundary)
        };
        let mut max_dev: f64 = 0.0;
        for _ in 0..n_samples {
            let mut a = Vec::with_capacity(chart.dim());
            for (k, (lo, hi, _)) in bounds.iter().enumerate() {
                a.push(if k == collar.axis { rng.random_range(h_lo..=h_hi) } else { rng.random_range(*lo..*hi) });
            }
            let mut dir: Vec<f64> = (0..chart.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            let len = rng.random_range(0.2..1.0) * 0.5 * collar.width;
            for x in &mut dir {
                *x *= len / norm;
            }
            let mut b: Vec<f64> = a
                .iter()
                .zip(&dir)
                .zip(chart.axes())
                .map(|((x, d), ax)| x + d / ax.scale)
                .collect();
            for (k, (x, ax)) in b.iter_mut().zip(chart.axes()).enumerate() {
                if k == collar.axis {
                    *x = x.clamp(h_lo, h_hi);
                } else if let AxisKind::Interval { a, b } = ax.kind {
                    *x = x.clamp(a, b);
                }
            }
            chart.normalize(&mut b);
            let d_ref = if reference.is_flat() {
                reference.base_distance(&a, &b)
            } else {
                solve_chart(&reference, &a, &b, &edge).length
            };
            if d_ref <= 1e-12 {
                continue;
            }
            let ia = metric.insert_flat(collar.piece, a)?;
            let ib = metric.insert_flat(collar.piece, b)?;
            let d_q = quotient_distance(metric.net(), ia, ib)?;
            max_dev = max_dev.max((d_q - d_ref).abs() / d_ref);
        }
        reports.push(CollarReport {
            name: collar.name.clone(),
            width: collar.width,
            n_pairs: n_samples,
            max_deviation: max_dev,
            passed: max_dev <= COLLAR_TOL,
        });
    }
    Ok(reports)
}

/// Straight-collar check of C(f) at collar width `eps`.
pub fn check_straight_collars(
    cyl: &CylinderSpace,
    eps: f64,
    n_samples: usize,
    cfg: &SolverConfig,
) -> Result<Vec<CollarReport>> {
    if !(eps > 0.0 && eps < 0.5 * PIECE_HEIGHT) {
        return Err(Error::InvalidDescriptor(format!(
            "collar width {eps} must lie below half the piece height"
        )));
    }
    let collars: Vec<CollarSpec> = cyl
        .quotient
        .collars
        .iter()
        .map(|c| CollarSpec { width: eps, ..c.clone() })
        .collect();
    let mut metric = QuotientMetric::new(&cyl.quotient, cfg)?;
    check_collars(&mut metric, &collars, n_samples, cfg.rng_seed, cfg.net.window)
}

/// C(φ_e, φ_ē): two cylinders glued along their edge-space ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoSidedCylinder {
    pub edge: String,
    pub bar: String,
    pub quotient: QuotientSpace,
    /// Mark names of the images of X_{∂(e)}×{2} and X_{∂(ē)}×{2}.
    pub x_e: String,
    pub x_bar: String,
    pub lambda_e: f64,
    pub lambda_bar: f64,
}

pub fn build_two_sided_cylinder(spec: &GraphOfSpacesSpec, edge: &str) -> Result<TwoSidedCylinder> {
    let resolved = spec.resolve()?;
    let e = resolved.edge(edge)?;
    if !resolved.oriented.contains(&e.id) {
        return Err(Error::spec(
            "orientation",
            format!("edge `{edge}` is not in the chosen orientation"),
        ));
    }
    let bar = resolved.edge(&e.bar)?;
    if e.edge_space != bar.edge_space {
        return Err(Error::CertificationFailed(format!(
            "edge spaces of `{}` and `{}` differ",
            e.id, bar.id
        )));
    }
    let cert_e = certify_gluing(&e.map)?;
    let cert_b = certify_gluing(&bar.map)?;
    let width = DEFAULT_COLLAR_FRACTION * PIECE_HEIGHT;
    let x_e = format!("X_{}", e.id);
    let x_bar = format!("X_{}", bar.id);
    let mut q = cylinder_quotient(&cert_e, &format!("Y_{}", e.id), &x_e, &format!("Y0_{}", e.id), &x_e, width)?;
    let off = append(
        &mut q,
        cylinder_quotient(&cert_b, &format!("Y_{}", bar.id), &x_bar, &format!("Y0_{}", bar.id), &x_bar, width)?,
    );
    let hy = Chart::new(&e.edge_space)?.dim();
    q.identifications.push(Identification {
        label: format!("Y_{} ~ Y_{}", e.id, bar.id),
        source: SliceChart::new(0, vec![(hy, 0.0)]),
        target: SliceChart::new(off, vec![(hy, 0.0)]),
        pairing: vec![AxisMap::Identity; hy],
    });
    // The glued edge-space ends are interior now; only the X ends keep collars
    // and boundary marks.
    q.marks.retain(|m| m.name == x_e || m.name == x_bar);
    q.collars.retain(|c| c.piece == 1 || c.piece == off + 1);
    for m in &mut q.marks {
        m.scale = Some(if m.name == x_e { e.lambda } else { bar.lambda });
    }
    Ok(TwoSidedCylinder {
        edge: e.id.clone(),
        bar: bar.id.clone(),
        quotient: q,
        x_e,
        x_bar,
        lambda_e: e.lambda,
        lambda_bar: bar.lambda,
    })
}
