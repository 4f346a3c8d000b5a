use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::geodesic::{solve_chart, GeodesicResult, Settings};
use crate::metric::{PointCoord, PolyPath, SpaceDescriptor};
use crate::quotient::Glued;

/// Distance evaluation inside one chart: either a single-chart space or one
/// piece of a quotient, whose points carry the piece tag.
#[derive(Clone, Debug)]
pub(crate) struct Probe {
    pub chart: Chart,
    desc: SpaceDescriptor,
    piece: Option<usize>,
}

/// Polygonal chart path with cumulative lengths.
#[derive(Clone, Debug)]
pub(crate) struct ChartPath {
    pub coords: Vec<Vec<f64>>,
    pub cumulative: Vec<f64>,
    pub converged: bool,
}

impl ChartPath {
    pub fn length(&self) -> f64 {
        *self.cumulative.last().expect("paths have a start")
    }
}

impl Probe {
    pub fn for_space(space: &SpaceDescriptor) -> Result<Self> {
        Ok(Probe {
            chart: Chart::new(space)?,
            desc: space.clone(),
            piece: None,
        })
    }

    pub fn for_piece(glued: &Glued, piece: usize) -> Self {
        Probe {
            chart: glued.chart(piece).clone(),
            desc: glued.space.pieces[piece].space.clone(),
            piece: Some(piece),
        }
    }

    /// A probe able to evaluate all of `points`; for quotients they must
    /// share one piece.
    pub fn for_points(space: &SpaceDescriptor, points: &[&PointCoord]) -> Result<Self> {
        match space.as_quotient()? {
            None => Probe::for_space(space),
            Some(q) => {
                let glued = Glued::new(q)?;
                let mut piece = None;
                for p in points {
                    let (i, _) = glued.flatten_point(p)?;
                    if piece.is_some_and(|j| j != i) {
                        return Err(Error::Unsupported(
                            "triangle checks on quotients run inside a single piece".into(),
                        ));
                    }
                    piece = Some(i);
                }
                let piece = piece.ok_or_else(|| Error::InvalidDescriptor("no points".into()))?;
                Ok(Probe::for_piece(&glued, piece))
            }
        }
    }

    pub fn flatten(&self, p: &PointCoord) -> Result<Vec<f64>> {
        let inner = match (self.piece, p) {
            (None, p) => p,
            (Some(i), PointCoord::Piece { piece, coord }) if *piece == i => coord,
            (Some(i), other) => return Err(Error::shape(format!("point in piece {i}"), format!("{other:?}"))),
        };
        let mut c = self.desc.flatten(inner)?;
        self.chart.normalize(&mut c);
        Ok(c)
    }

    pub fn point(&self, coords: &[f64]) -> Result<PointCoord> {
        let mut c = coords.to_vec();
        self.chart.normalize(&mut c);
        let p = self.desc.unflatten(&c)?;
        Ok(match self.piece {
            Some(i) => PointCoord::piece(i, p),
            None => p,
        })
    }

    pub fn path(&self, a: &[f64], b: &[f64], s: &Settings) -> ChartPath {
        let (coords, converged) = if self.chart.is_flat() {
            let delta = self.chart.wrap_delta(a, b);
            (vec![a.to_vec(), a.iter().zip(&delta).map(|(x, d)| x + d).collect()], true)
        } else {
            let sol = solve_chart(&self.chart, a, b, s);
            (sol.coords, sol.converged)
        };
        let mut cumulative = vec![0.0];
        for w in coords.windows(2) {
            let delta: Vec<f64> = w[1].iter().zip(&w[0]).map(|(q, p)| q - p).collect();
            let step = if self.chart.is_flat() {
                self.chart.eval(&w[0], &delta)
            } else {
                self.chart.segment_length(&w[0], &delta)
            };
            cumulative.push(cumulative.last().expect("nonempty") + step);
        }
        ChartPath {
            coords,
            cumulative,
            converged,
        }
    }

    pub fn distance(&self, a: &[f64], b: &[f64], s: &Settings) -> f64 {
        if self.chart.is_flat() {
            self.chart.base_distance(a, b)
        } else {
            self.path(a, b, s).length()
        }
    }

    pub fn result(&self, path: &ChartPath) -> Result<GeodesicResult> {
        let waypoints = path.coords.iter().map(|c| self.point(c)).collect::<Result<Vec<_>>>()?;
        Ok(GeodesicResult {
            length: path.length(),
            path: PolyPath::uniform(waypoints)?,
            converged: path.converged,
            restarts_used: 0,
            net_epsilon: None,
        })
    }
}

/// Point at arclength fraction `s` of a chart path, in lifted coordinates.
pub(crate) fn point_at(path: &ChartPath, s: f64) -> Vec<f64> {
    let target = s.clamp(0.0, 1.0) * path.length();
    let n = path.coords.len();
    for i in 1..n {
        let (l0, l1) = (path.cumulative[i - 1], path.cumulative[i]);
        if target <= l1 || i == n - 1 {
            let tau = if l1 > l0 { ((target - l0) / (l1 - l0)).clamp(0.0, 1.0) } else { 0.0 };
            return path.coords[i - 1]
                .iter()
                .zip(&path.coords[i])
                .map(|(a, b)| a + tau * (b - a))
                .collect();
        }
    }
    path.coords[0].clone()
}
