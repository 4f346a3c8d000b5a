use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::cylinder::{append, build_two_sided_cylinder};
use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::metric::SpaceDescriptor;
use crate::quotient::{AxisMap, Glued, Identification, MapDescriptor, Piece, QuotientSpace, SliceChart};
use crate::warp::WarpVector;

const PAIRING_TOL: f64 = 1e-9;
const PAIRING_RADIUS: f64 = 1e-3;
const PAIRING_SAMPLES: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexSpec {
    pub id: String,
    pub space: SpaceDescriptor,
}

/// An oriented edge e with its reverse `bar`, origin vertex ∂e and gluing
/// φ_e: Y_e → λ_e X_{∂e}.  Either a full `map` or a circle-cover degree `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub id: String,
    pub bar: String,
    pub origin: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_space: Option<SpaceDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphOfSpacesSpec {
    pub vertices: Vec<VertexSpec>,
    #[serde(default)]
    pub edges: Vec<EdgeSpec>,
    /// One edge from each {e, ē}; defaults to the first listed of each pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<Vec<String>>,
    /// Edge ids of a maximal tree, one per pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<Vec<String>>,
}

#[derive(Clone, Debug)]
pub(crate) struct ResolvedEdge {
    pub id: String,
    pub bar: String,
    pub origin: String,
    pub edge_space: SpaceDescriptor,
    pub map: MapDescriptor,
    pub lambda: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct ResolvedGraph {
    pub vertices: Vec<VertexSpec>,
    pub edges: Vec<ResolvedEdge>,
    pub oriented: Vec<String>,
}

impl ResolvedGraph {
    pub fn edge(&self, id: &str) -> Result<&ResolvedEdge> {
        self.edges
            .iter()
            .find(|e| e.id == id)
            .ok_or_else(|| Error::UnknownEdge(id.into()))
    }

    pub fn vertex_index(&self, id: &str) -> usize {
        self.vertices
            .iter()
            .position(|v| v.id == id)
            .expect("origins are checked during resolution")
    }

    pub fn warp(&self) -> Result<WarpVector> {
        WarpVector::new(self.edges.iter().map(|e| (e.id.clone(), e.lambda)).collect())
    }
}

/// φ: Circle(c) → (1/|k|)·Circle(c), x ↦ kx, a local isometry of degree k.
pub(crate) fn circle_cover_on(circumference: f64, k: i64) -> Result<MapDescriptor> {
    if k == 0 {
        return Err(Error::spec("k", "degree must be nonzero"));
    }
    MapDescriptor::new(
        SpaceDescriptor::circle(circumference),
        SpaceDescriptor::scaled(1.0 / k.unsigned_abs() as f64, SpaceDescriptor::circle(circumference)),
        vec![AxisMap::CircleCover {
            degree: k,
            domain: circumference,
            codomain: circumference,
        }],
    )
}

/// λ with codomain = Scaled(λ, x_v), or 1 when the codomain is x_v itself.
fn infer_lambda(codomain: &SpaceDescriptor, x_v: &SpaceDescriptor) -> Option<f64> {
    match codomain {
        c if c == x_v => Some(1.0),
        SpaceDescriptor::Scaled { factor, inner } if **inner == *x_v => Some(*factor),
        _ => None,
    }
}

impl GraphOfSpacesSpec {
    pub(crate) fn resolve(&self) -> Result<ResolvedGraph> {
        if self.vertices.is_empty() {
            return Err(Error::spec("vertices", "at least one vertex is required"));
        }
        let mut ids = BTreeSet::new();
        for (i, v) in self.vertices.iter().enumerate() {
            if !ids.insert(v.id.as_str()) {
                return Err(Error::spec(format!("vertices[{i}].id"), format!("duplicate id `{}`", v.id)));
            }
            v.space
                .validate()
                .map_err(|e| Error::spec(format!("vertices[{i}].space"), e.to_string()))?;
            if !v.space.is_single_chart() {
                return Err(Error::spec(format!("vertices[{i}].space"), "must be a single-chart space"));
            }
        }
        let by_id: BTreeMap<&str, usize> = self.edges.iter().enumerate().map(|(i, e)| (e.id.as_str(), i)).collect();
        if by_id.len() != self.edges.len() {
            return Err(Error::spec("edges", "duplicate edge ids"));
        }

        let mut edges = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            let field = |f: &str| format!("edges[{i}].{f}");
            match by_id.get(e.bar.as_str()) {
                Some(&j) if self.edges[j].bar == e.id && j != i => {}
                _ => return Err(Error::spec(field("bar"), format!("`{}` is not the reverse of `{}`", e.bar, e.id))),
            }
            if ids.contains(e.id.as_str()) {
                return Err(Error::spec(field("id"), "edge ids must differ from vertex ids"));
            }
            let x_v = &self
                .vertices
                .iter()
                .find(|v| v.id == e.origin)
                .ok_or_else(|| Error::spec(field("origin"), format!("no vertex `{}`", e.origin)))?
                .space;
            let map = match (&e.map, e.k) {
                (Some(_), Some(_)) => return Err(Error::spec(field("k"), "give either k or map, not both")),
                (Some(m), None) => m.clone(),
                (None, Some(k)) => {
                    let SpaceDescriptor::Circle { circumference } = x_v else {
                        return Err(Error::spec(field("k"), "degree form needs a circle vertex space"));
                    };
                    circle_cover_on(*circumference, k).map_err(|_| Error::spec(field("k"), "degree must be nonzero"))?
                }
                (None, None) => return Err(Error::spec(field("map"), "missing gluing map or degree k")),
            };
            map.validate().map_err(|err| Error::spec(field("map"), err.to_string()))?;
            let edge_space = e.edge_space.clone().unwrap_or_else(|| map.domain.clone());
            if edge_space != map.domain {
                return Err(Error::spec(field("edge_space"), "differs from the map domain"));
            }
            let inferred = infer_lambda(&map.codomain, x_v).ok_or_else(|| {
                Error::LambdaMismatch(format!(
                    "edge `{}`: codomain is not a rescaling of the vertex space `{}`",
                    e.id, e.origin
                ))
            })?;
            if let Some(l) = e.lambda {
                if (l - inferred).abs() > 1e-12 * inferred.max(1.0) {
                    return Err(Error::LambdaMismatch(format!(
                        "edge `{}`: lambda {l} but the map lands in a copy scaled by {inferred}",
                        e.id
                    )));
                }
            }
            edges.push(ResolvedEdge {
                id: e.id.clone(),
                bar: e.bar.clone(),
                origin: e.origin.clone(),
                edge_space,
                map,
                lambda: inferred,
            });
        }
        for e in &edges {
            let bar = &edges[by_id[e.bar.as_str()]];
            if bar.edge_space != e.edge_space {
                return Err(Error::spec(
                    format!("edges[{}].edge_space", by_id[e.id.as_str()]),
                    format!("Y_{} and Y_{} differ", e.id, bar.id),
                ));
            }
        }

        let oriented = match &self.orientation {
            Some(o) => {
                let set: BTreeSet<&str> = o.iter().map(String::as_str).collect();
                for (i, id) in o.iter().enumerate() {
                    let Some(&j) = by_id.get(id.as_str()) else {
                        return Err(Error::spec(format!("orientation[{i}]"), format!("no edge `{id}`")));
                    };
                    if set.contains(self.edges[j].bar.as_str()) {
                        return Err(Error::spec("orientation", format!("contains both `{id}` and its reverse")));
                    }
                }
                if set.len() * 2 != self.edges.len() || set.len() != o.len() {
                    return Err(Error::spec("orientation", "must pick exactly one edge of each pair"));
                }
                o.clone()
            }
            None => {
                let mut seen = BTreeSet::new();
                let mut out = Vec::new();
                for e in &self.edges {
                    if !seen.contains(e.bar.as_str()) {
                        out.push(e.id.clone());
                    }
                    seen.insert(e.id.as_str());
                }
                out
            }
        };
        Ok(ResolvedGraph {
            vertices: self.vertices.clone(),
            edges,
            oriented,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.resolve().map(|_| ())
    }
}

/// 𝒴 with its fiber warp.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiWarpSpace {
    pub space: SpaceDescriptor,
    pub warp: WarpVector,
    /// Piece index of each vertex space; empty when 𝒴 is a single chart.
    pub vertex_pieces: Vec<(String, usize)>,
}

/// The multiwarped space 𝒴: vertex spaces and two-sided cylinders, each
/// warped over ℝ^E, with X_e ×_λ ℝ^E glued onto X_{∂e} ×_λ ℝ^E by the
/// translation t ↦ t + δ_e.
pub fn build_multiwarp_space(spec: &GraphOfSpacesSpec) -> Result<MultiWarpSpace> {
    let g = spec.resolve()?;
    let warp = g.warp()?;
    if g.edges.is_empty() {
        if g.vertices.len() != 1 {
            return Err(Error::spec("edges", "a graph without edges must have one vertex"));
        }
        let space = g.vertices[0].space.clone();
        let space = if warp.is_empty() { space } else { SpaceDescriptor::warped(space, warp.clone()) };
        return Ok(MultiWarpSpace {
            space,
            warp,
            vertex_pieces: Vec::new(),
        });
    }

    let mut q = QuotientSpace::new(
        g.vertices
            .iter()
            .map(|v| Piece {
                name: format!("X_{}", v.id),
                space: v.space.clone(),
                window: None,
            })
            .collect(),
        Vec::new(),
    );
    for e in &g.oriented {
        let cyl = build_two_sided_cylinder(spec, e)?;
        let mut cq = cyl.quotient;
        for p in &mut cq.pieces {
            p.name = format!("C_{e}:{}", p.name);
        }
        append(&mut q, cq);
    }
    let mut q = q.warped(&warp);

    // Shift identifications X_{e*} ×{2} × ℝ^E → X_{∂e*} × ℝ^E.
    let mut shifts = Vec::new();
    for m in &q.marks {
        let id = m.name.strip_prefix("X_").expect("cylinder marks are named X_<edge>");
        let e = g.edge(id)?;
        let v = g.vertex_index(&e.origin);
        let cyl_piece = m.slice.piece;
        let dim = Chart::new(&q.pieces[cyl_piece].space)?.dim();
        let nx = dim - warp.len() - 1;
        let shift_axis = warp.index_of(id)?;
        let mut pairing = vec![AxisMap::Identity; nx + warp.len()];
        pairing[nx + shift_axis] = AxisMap::Affine { scale: 1.0, offset: 1.0 };
        shifts.push(Identification {
            label: format!("shift {id}: X_{id} -> X_{}", e.origin),
            source: m.slice.clone(),
            target: SliceChart::new(v, Vec::new()),
            pairing,
        });
    }
    q.identifications.extend(shifts);
    q.claims.push("the multiwarped space is locally CAT(0) when every X_v and Y_e is".into());

    let glued = Glued::new(q.clone())?;
    for (label, dev) in glued.pairing_deviation(PAIRING_RADIUS, PAIRING_SAMPLES, 0x9a1, [-1.0, 1.0]) {
        if dev > PAIRING_TOL {
            return Err(Error::CertificationFailed(format!(
                "identification `{label}` distorts lengths by {dev:.3e}"
            )));
        }
    }
    let vertex_pieces = g.vertices.iter().enumerate().map(|(i, v)| (v.id.clone(), i)).collect();
    Ok(MultiWarpSpace {
        space: SpaceDescriptor::Quotient(Box::new(q)),
        warp,
        vertex_pieces,
    })
}

/// Piece and gluing inventory of a complex, without metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexSummary {
    pub pieces: Vec<String>,
    /// (label, from piece, to piece).
    pub identifications: Vec<(String, String, String)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombinatorialComplex {
    /// Γ(𝒳): vertex spaces and Y_e × [0,1] for each e in the orientation.
    pub total: ComplexSummary,
    /// Γ̄(𝒳): vertex spaces and the two-sided cylinders.
    pub extended: ComplexSummary,
    pub claims: Vec<String>,
}

pub fn build_total_space_combinatorial(spec: &GraphOfSpacesSpec) -> Result<CombinatorialComplex> {
    let g = spec.resolve()?;
    let vertex = |id: &str| format!("X_{id}");
    let mut total = ComplexSummary {
        pieces: g.vertices.iter().map(|v| vertex(&v.id)).collect(),
        identifications: Vec::new(),
    };
    let mut extended = total.clone();
    for id in &g.oriented {
        let e = g.edge(id)?;
        let bar = g.edge(&e.bar)?;
        let strip = format!("Y_{}x[0,1]", e.id);
        total.pieces.push(strip.clone());
        total
            .identifications
            .push((format!("(y,0) ~ phi_{}(y)", e.id), strip.clone(), vertex(&e.origin)));
        total
            .identifications
            .push((format!("(y,1) ~ phi_{}(y)", bar.id), strip, vertex(&bar.origin)));

        let cyl = format!("C(phi_{}, phi_{})", e.id, bar.id);
        extended.pieces.push(cyl.clone());
        extended
            .identifications
            .push((format!("X_{} ~ X_{}", e.id, e.origin), cyl.clone(), vertex(&e.origin)));
        extended
            .identifications
            .push((format!("X_{} ~ X_{}", bar.id, bar.origin), cyl, vertex(&bar.origin)));
    }
    Ok(CombinatorialComplex {
        total,
        extended,
        claims: vec![
            "Y_ebar x [0,1] is identified with Y_e x [0,1] by (y,t) ~ (y,1-t)".into(),
            "the total space is homotopy equivalent to its extended version".into(),
            "the total space is nonpositively curved when all gluings are certified".into(),
        ],
    })
}
