//! Exponential multi-warps f_λ(t) = ∏ λ(e)^{t_e} over a fiber ℝ^E.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{path_length, PointCoord, PolyPath, SpaceDescriptor};

/// Ordered edge set E with a positive scale λ(e) per edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWarp", into = "RawWarp")]
pub struct WarpVector {
    edges: Vec<String>,
    lambdas: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawWarp {
    edges: Vec<String>,
    lambdas: BTreeMap<String, f64>,
}

impl TryFrom<RawWarp> for WarpVector {
    type Error = Error;

    fn try_from(raw: RawWarp) -> Result<Self> {
        if raw.edges.len() != raw.lambdas.len() {
            return Err(Error::InvalidDescriptor(
                "warp edges and lambdas must cover the same edge set".into(),
            ));
        }
        let pairs = raw
            .edges
            .iter()
            .map(|e| {
                raw.lambdas
                    .get(e)
                    .map(|l| (e.clone(), *l))
                    .ok_or_else(|| Error::UnknownEdge(e.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        WarpVector::new(pairs)
    }
}

impl From<WarpVector> for RawWarp {
    fn from(w: WarpVector) -> Self {
        let lambdas = w.edges.iter().cloned().zip(w.lambdas.iter().copied()).collect();
        RawWarp {
            edges: w.edges,
            lambdas,
        }
    }
}

impl WarpVector {
    pub fn new(pairs: Vec<(String, f64)>) -> Result<Self> {
        let (edges, lambdas): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let w = WarpVector { edges, lambdas };
        w.validate()?;
        Ok(w)
    }

    pub fn single(edge: impl Into<String>, lambda: f64) -> Result<Self> {
        WarpVector::new(vec![(edge.into(), lambda)])
    }

    /// λ ≡ 1 on the given edges.
    pub fn ones<S: Into<String>>(edges: impl IntoIterator<Item = S>) -> Result<Self> {
        WarpVector::new(edges.into_iter().map(|e| (e.into(), 1.0)).collect())
    }

    pub fn empty() -> Self {
        WarpVector {
            edges: Vec::new(),
            lambdas: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, (e, l)) in self.iter().enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidDescriptor(format!(
                    "lambda for edge `{e}` must be positive, got {l}"
                )));
            }
            if self.edges[..i].contains(&e.to_string()) {
                return Err(Error::InvalidDescriptor(format!("duplicate warp edge `{e}`")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edges(&self) -> &[String] {
        &self.edges
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.edges
            .iter()
            .map(String::as_str)
            .zip(self.lambdas.iter().copied())
    }

    pub fn index_of(&self, edge: &str) -> Result<usize> {
        self.edges
            .iter()
            .position(|e| e == edge)
            .ok_or_else(|| Error::UnknownEdge(edge.to_string()))
    }

    pub fn lambda(&self, edge: &str) -> Result<f64> {
        Ok(self.lambdas[self.index_of(edge)?])
    }
}

/// A point t ∈ ℝ^E, stored in the warp vector's edge order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarpFiberCoord(pub Vec<f64>);

impl WarpFiberCoord {
    pub fn zero(warp: &WarpVector) -> Self {
        WarpFiberCoord(vec![0.0; warp.len()])
    }

    pub fn from_map(warp: &WarpVector, t: &BTreeMap<String, f64>) -> Result<Self> {
        if t.len() != warp.len() {
            return Err(Error::shape(
                format!("{} fiber coordinates", warp.len()),
                format!("{}", t.len()),
            ));
        }
        warp.edges()
            .iter()
            .map(|e| t.get(e).copied().ok_or_else(|| Error::UnknownEdge(e.clone())))
            .collect::<Result<_>>()
            .map(WarpFiberCoord)
    }

    /// The indicator vector δ_e.
    pub fn delta(warp: &WarpVector, edge: &str) -> Result<Self> {
        let mut t = WarpFiberCoord::zero(warp);
        t.0[warp.index_of(edge)?] = 1.0;
        Ok(t)
    }
}

/// f_λ(t) = ∏_e λ(e)^{t_e}.
pub fn warp_factor(warp: &WarpVector, t: &WarpFiberCoord) -> Result<f64> {
    if t.0.len() != warp.len() {
        return Err(Error::shape(
            format!("{} fiber coordinates", warp.len()),
            format!("{}", t.0.len()),
        ));
    }
    Ok(warp.lambdas().iter().zip(&t.0).map(|(l, x)| l.powf(*x)).product())
}

pub fn make_warped(inner: SpaceDescriptor, warp: WarpVector) -> SpaceDescriptor {
    SpaceDescriptor::warped(inner, warp)
}

/// Length of a path in `inner ×_λ ℝ^E`.
pub fn warped_path_length(
    inner: &SpaceDescriptor,
    warp: &WarpVector,
    path: &PolyPath,
    tol: f64,
) -> Result<f64> {
    path_length(&make_warped(inner.clone(), warp.clone()), path, tol)
}

/// (x, t) ↦ (x, t + δ_e).
pub fn shift_map(warp: &WarpVector, edge: &str, p: &PointCoord) -> Result<PointCoord> {
    shift_by(warp, edge, p, 1.0)
}

pub(crate) fn shift_by(warp: &WarpVector, edge: &str, p: &PointCoord, amount: f64) -> Result<PointCoord> {
    let i = warp.index_of(edge)?;
    match p {
        PointCoord::Warped { base, fiber } if fiber.len() == warp.len() => {
            let mut fiber = fiber.clone();
            fiber[i] += amount;
            Ok(PointCoord::Warped {
                base: base.clone(),
                fiber,
            })
        }
        _ => Err(Error::shape(
            format!("warped point with {} fiber coordinates", warp.len()),
            format!("{p:?}"),
        )),
    }
}

/// Apply [`shift_map`] to every waypoint.
pub fn shift_path(warp: &WarpVector, edge: &str, path: &PolyPath) -> Result<PolyPath> {
    let waypoints = path
        .waypoints()
        .iter()
        .map(|p| shift_map(warp, edge, p))
        .collect::<Result<_>>()?;
    PolyPath::new(waypoints, path.params().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::partition_sum;

    fn w23() -> WarpVector {
        WarpVector::new(vec![("a".into(), 2.0), ("b".into(), 3.0)]).unwrap()
    }

    #[test]
    fn factor_arithmetic() {
        assert_eq!(warp_factor(&w23(), &WarpFiberCoord(vec![1.0, 2.0])).unwrap(), 18.0);
        assert_eq!(warp_factor(&w23(), &WarpFiberCoord::zero(&w23())).unwrap(), 1.0);
        let w = WarpVector::single("e", 2.0).unwrap();
        assert_eq!(warp_factor(&w, &WarpFiberCoord(vec![-1.0])).unwrap(), 0.5);
        assert!(warp_factor(&w, &WarpFiberCoord(vec![])).is_err());
    }

    #[test]
    fn json_shape_and_validation() {
        let s = serde_json::to_string(&w23()).unwrap();
        assert_eq!(s, r#"{"edges":["a","b"],"lambdas":{"a":2.0,"b":3.0}}"#);
        assert_eq!(serde_json::from_str::<WarpVector>(&s).unwrap(), w23());
        let bad = r#"{"edges":["a"],"lambdas":{"b":2.0}}"#;
        assert!(serde_json::from_str::<WarpVector>(bad).is_err());
        let neg = r#"{"edges":["a"],"lambdas":{"a":-2.0}}"#;
        assert!(serde_json::from_str::<WarpVector>(neg).is_err());
        assert!(WarpVector::new(vec![("a".into(), 1.0), ("a".into(), 2.0)]).is_err());
    }

    #[test]
    fn vertical_and_horizontal_segments() {
        let w = WarpVector::single("e", 2.0).unwrap();
        let pt = |x: f64, t: f64| PointCoord::warped(PointCoord::Real(x), vec![t]);
        let v = PolyPath::uniform(vec![pt(0.3, 0.0), pt(0.3, 5.0)]).unwrap();
        assert!((warped_path_length(&SpaceDescriptor::Line, &w, &v, 1e-9).unwrap() - 5.0).abs() < 1e-12);
        let h = PolyPath::uniform(vec![pt(0.0, 1.0), pt(3.0, 1.0)]).unwrap();
        let space = make_warped(SpaceDescriptor::Line, w.clone());
        for depth in 0..6 {
            assert!((partition_sum(&space, &h, depth).unwrap() - 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_examples() {
        let w = WarpVector::single("e", 2.0).unwrap();
        let p = PointCoord::warped(PointCoord::Real(0.3), vec![0.0]);
        assert_eq!(
            shift_map(&w, "e", &p).unwrap(),
            PointCoord::warped(PointCoord::Real(0.3), vec![1.0])
        );
        assert!(matches!(shift_map(&w, "f", &p), Err(Error::UnknownEdge(_))));

        let pt = |x: f64, t: f64| PointCoord::warped(PointCoord::Real(x), vec![t]);
        let scaled = PolyPath::uniform(vec![pt(0.0, 0.0), pt(1.0, 0.0)]).unwrap();
        let l1 = warped_path_length(&SpaceDescriptor::scaled(2.0, SpaceDescriptor::Line), &w, &scaled, 1e-12).unwrap();
        let l2 = warped_path_length(&SpaceDescriptor::Line, &w, &shift_path(&w, "e", &scaled).unwrap(), 1e-12).unwrap();
        assert!((l1 - 2.0).abs() < 1e-12 && (l2 - 2.0).abs() < 1e-12);
    }
}
