use serde::{Deserialize, Serialize};

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::metric::SpaceDescriptor;

/// A map of one chart coordinate onto another.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AxisMap {
    Identity,
    Affine { scale: f64, offset: f64 },
    /// y = codomain · frac(degree · x / domain), circumferences in coordinates.
    CircleCover { degree: i64, domain: f64, codomain: f64 },
}

impl AxisMap {
    pub fn validate(&self) -> Result<()> {
        match self {
            AxisMap::Identity => Ok(()),
            AxisMap::Affine { scale, offset } => {
                if scale.is_finite() && *scale != 0.0 && offset.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidDescriptor(format!(
                        "affine map needs finite nonzero scale, got {scale}"
                    )))
                }
            }
            AxisMap::CircleCover {
                degree,
                domain,
                codomain,
            } => {
                if *degree == 0 {
                    Err(Error::InvalidDescriptor("circle cover of degree 0".into()))
                } else if !(*domain > 0.0 && *codomain > 0.0) {
                    Err(Error::InvalidDescriptor("circle cover needs positive circumferences".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            AxisMap::Identity => x,
            AxisMap::Affine { scale, offset } => scale * x + offset,
            AxisMap::CircleCover {
                degree,
                domain,
                codomain,
            } => {
                let y = codomain * (degree as f64 * x / domain).rem_euclid(1.0);
                if y >= codomain {
                    0.0
                } else {
                    y
                }
            }
        }
    }

    /// Every x with apply(x) = y, circle preimages normalized to [0, domain).
    pub fn preimages(&self, y: f64) -> Vec<f64> {
        match *self {
            AxisMap::Identity => vec![y],
            AxisMap::Affine { scale, offset } => vec![(y - offset) / scale],
            AxisMap::CircleCover {
                degree,
                domain,
                codomain,
            } => {
                let k = degree as f64;
                let mut xs: Vec<f64> = (0..degree.unsigned_abs())
                    .map(|j| {
                        let x = (domain * (y / codomain + j as f64) / k).rem_euclid(domain);
                        if x >= domain {
                            0.0
                        } else {
                            x
                        }
                    })
                    .collect();
                xs.sort_by(f64::total_cmp);
                xs
            }
        }
    }

    /// Number of preimages per point.
    pub fn sheets(&self) -> usize {
        match self {
            AxisMap::CircleCover { degree, .. } => degree.unsigned_abs() as usize,
            _ => 1,
        }
    }

    /// Smallest coordinate distance between two preimages of one point.
    pub fn fiber_spacing(&self) -> Option<f64> {
        match self {
            AxisMap::CircleCover { degree, domain, .. } if degree.unsigned_abs() > 1 => {
                Some(domain / degree.unsigned_abs() as f64)
            }
            _ => None,
        }
    }
}

/// A primitive continuous map between single-chart spaces, acting axis by
/// axis on chart coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapDescriptor {
    pub domain: SpaceDescriptor,
    pub codomain: SpaceDescriptor,
    pub axes: Vec<AxisMap>,
}

impl MapDescriptor {
    pub fn new(domain: SpaceDescriptor, codomain: SpaceDescriptor, axes: Vec<AxisMap>) -> Result<Self> {
        let m = MapDescriptor {
            domain,
            codomain,
            axes,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn identity(space: SpaceDescriptor) -> Result<Self> {
        let dim = Chart::new(&space)?.dim();
        MapDescriptor::new(space.clone(), space, vec![AxisMap::Identity; dim])
    }

    /// The coordinate identity X → Scaled(factor, X).
    pub fn scaled_identity(space: SpaceDescriptor, factor: f64) -> Result<Self> {
        let dim = Chart::new(&space)?.dim();
        MapDescriptor::new(
            space.clone(),
            SpaceDescriptor::scaled(factor, space),
            vec![AxisMap::Identity; dim],
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        self.codomain.validate()?;
        let d = Chart::new(&self.domain)?;
        let c = Chart::new(&self.codomain)?;
        if d.dim() != self.axes.len() || c.dim() != self.axes.len() {
            return Err(Error::shape(
                format!("{} axis maps", self.axes.len()),
                format!("domain dim {}, codomain dim {}", d.dim(), c.dim()),
            ));
        }
        self.axes.iter().try_for_each(AxisMap::validate)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.axes.iter().zip(x).map(|(m, x)| m.apply(*x)).collect()
    }

    pub fn preimages(&self, y: &[f64]) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new()];
        for (m, y) in self.axes.iter().zip(y) {
            let xs = m.preimages(*y);
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

    pub fn is_injective(&self) -> bool {
        self.axes.iter().all(|m| m.sheets() == 1)
    }

    /// Smallest distance, in the domain metric, between distinct points of
    /// one fiber; `None` for injective maps.
    pub fn fiber_separation(&self) -> Result<Option<f64>> {
        let chart = Chart::new(&self.domain)?;
        Ok(self
            .axes
            .iter()
            .zip(chart.axes())
            .filter_map(|(m, ax)| m.fiber_spacing().map(|s| s * ax.scale))
            .min_by(f64::total_cmp))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::wrap;

    #[test]
    fn circle_cover_fibers() {
        let m = AxisMap::CircleCover {
            degree: 2,
            domain: 1.0,
            codomain: 1.0,
        };
        assert!((m.apply(0.3) - 0.6).abs() < 1e-15);
        let pre = m.preimages(0.6);
        assert_eq!(pre.len(), 2);
        assert!((pre[0] - 0.3).abs() < 1e-15 && (pre[1] - 0.8).abs() < 1e-15);
        for x in pre {
            assert!((m.apply(x) - 0.6).abs() < 1e-12);
        }
        assert_eq!(m.fiber_spacing(), Some(0.5));
    }

    #[test]
    fn negative_degree_reverses() {
        let m = AxisMap::CircleCover {
            degree: -3,
            domain: 1.0,
            codomain: 1.0,
        };
        assert!((m.apply(0.1) - 0.7).abs() < 1e-12);
        for x in m.preimages(0.25) {
            assert!(wrap(m.apply(x) - 0.25, 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn affine_inverts() {
        let m = AxisMap::Affine {
            scale: 2.0,
            offset: 1.0,
        };
        assert_eq!(m.preimages(m.apply(0.75)), vec![0.75]);
        assert!(AxisMap::Affine {
            scale: 0.0,
            offset: 0.0
        }
        .validate()
        .is_err());
    }
}
