//! Flattened coordinate charts.
//!
//! Every single-chart space (primitives, scalings, Euclidean products and
//! exponential warps of those) is compiled into a list of real axes plus a
//! small expression tree describing how coordinate displacements combine
//! into length.  The same tree yields the partition-sum term used by the
//! path-length refinement and the length density integrated by the solver.

use crate::error::{Error, Result};
use crate::metric::SpaceDescriptor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AxisKind {
    Line,
    Interval { a: f64, b: f64 },
    Circle { circumference: f64 },
    /// One coordinate of the ℝ^E fiber of a warped product.
    Fiber,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub kind: AxisKind,
    /// Product of the scale factors above this axis (warps excluded).
    pub scale: f64,
}

impl Axis {
    pub fn bounds(&self) -> (f64, f64) {
        match self.kind {
            AxisKind::Interval { a, b } => (a, b),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn circumference(&self) -> Option<f64> {
        match self.kind {
            AxisKind::Circle { circumference } => Some(circumference),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
enum Node {
    Axis(usize),
    Scaled(f64, Box<Node>),
    Product(Vec<Node>),
    Warped {
        inner: Box<Node>,
        /// (fiber axis, ln λ(e))
        fiber: Vec<(usize, f64)>,
    },
}

// Gauss-Legendre nodes and weights on [-1, 1].
const GL_X: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_W: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Largest change of ln f_λ allowed inside one quadrature panel.
const PANEL_LOG_WARP: f64 = 0.5;

#[derive(Clone, Debug)]
pub struct Chart {
    axes: Vec<Axis>,
    root: Node,
    warped: bool,
}

impl Chart {
    pub fn new(desc: &SpaceDescriptor) -> Result<Self> {
        let mut axes = Vec::new();
        let mut warped = false;
        let root = build(desc, 1.0, &mut axes, &mut warped)?;
        Ok(Chart { axes, root, warped })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    /// True when no warp occurs, i.e. the metric is flat in these coordinates.
    pub fn is_flat(&self) -> bool {
        !self.warped
    }

    pub fn normalize(&self, coords: &mut [f64]) {
        for (x, axis) in coords.iter_mut().zip(&self.axes) {
            if let Some(c) = axis.circumference() {
                *x = x.rem_euclid(c);
                if *x >= c {
                    *x = 0.0;
                }
            }
        }
    }

    /// Coordinate displacement from `a` to `b`, taking the shorter arc on
    /// circle axes (antipodal ties go in the positive direction).
    pub fn wrap_delta(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        self.axes
            .iter()
            .zip(a.iter().zip(b))
            .map(|(axis, (x, y))| match axis.circumference() {
                Some(c) => wrap(y - x, c),
                None => y - x,
            })
            .collect()
    }

    /// Length element of displacement `delta` with warps evaluated at `pos`.
    pub fn eval(&self, pos: &[f64], delta: &[f64]) -> f64 {
        eval_node(&self.root, pos, delta)
    }

    /// The partition-sum term between consecutive samples `a` and `b`:
    /// primitive distances combined exactly, warps evaluated at the right
    /// endpoint `b`.
    pub fn partition_term(&self, a: &[f64], b: &[f64]) -> f64 {
        let delta = self.wrap_delta(a, b);
        self.eval(b, &delta)
    }

    /// Closed-form distance for flat charts.
    pub fn base_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert!(self.is_flat());
        // Arc lengths from |y - x| so that swapping a and b is exact.
        let delta: Vec<f64> = self
            .axes
            .iter()
            .zip(a.iter().zip(b))
            .map(|(axis, (x, y))| {
                let d = (y - x).abs();
                match axis.circumference() {
                    Some(c) => {
                        let r = d.rem_euclid(c);
                        r.min(c - r)
                    }
                    None => d,
                }
            })
            .collect();
        self.eval(a, &delta)
    }

    /// Length of the coordinate-straight segment `a + u·delta`, u ∈ [0,1],
    /// integrating the length density by Gauss-Legendre quadrature.
    pub fn segment_length(&self, a: &[f64], delta: &[f64]) -> f64 {
        if !self.warped {
            return self.eval(a, delta);
        }
        if let Some(len) = self.single_warp_length(a, delta) {
            return len;
        }
        let panels = (self.log_warp_variation(delta) / PANEL_LOG_WARP)
            .ceil()
            .clamp(1.0, 256.0) as usize;
        let width = 1.0 / panels as f64;
        let mut pos = a.to_vec();
        let mut total = 0.0;
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * width;
            for (x, w) in GL_X.iter().zip(GL_W) {
                for sign in [-1.0, 1.0] {
                    let u = mid + sign * x * 0.5 * width;
                    for (k, slot) in pos.iter_mut().enumerate() {
                        *slot = a[k] + u * delta[k];
                    }
                    total += w * 0.5 * width * self.eval(&pos, delta);
                }
            }
        }
        total
    }

    /// Exact segment length when the chart is one warp over a flat inner
    /// space.  There the density is sqrt(h² e^{2(α+βu)} + v²) with h, v
    /// constant, and w = h e^{α+βu} gives the antiderivative
    /// (sqrt(w² + v²) − v·asinh(v/w)) / β.  Both differences are rewritten
    /// through expm1 so that short and nearly level segments keep their digits.
    fn single_warp_length(&self, a: &[f64], delta: &[f64]) -> Option<f64> {
        let Node::Warped { inner, fiber } = &self.root else {
            return None;
        };
        if has_warp(inner) {
            return None;
        }
        let alpha: f64 = fiber.iter().map(|(i, l)| l * a[*i]).sum();
        let beta: f64 = fiber.iter().map(|(i, l)| l * delta[*i]).sum();
        let h = eval_node(inner, a, delta);
        let v = fiber.iter().map(|(i, _)| delta[*i] * delta[*i]).sum::<f64>().sqrt();
        if h == 0.0 {
            return Some(v);
        }
        let (w0, w1) = (h * alpha.exp(), h * (alpha + beta).exp());
        let (s0, s1) = (w0.hypot(v), w1.hypot(v));
        if beta == 0.0 {
            return Some(s0);
        }
        // s1 − s0, and asinh(v/w1) − asinh(v/w0) = asinh(v (s0 − s1) / (w0 w1)).
        let ds = w0 * w0 * (2.0 * beta).exp_m1() / (s0 + s1);
        let tail = if v == 0.0 { 0.0 } else { v * (-v * ds / (w0 * w1)).asinh() };
        if !(ds.is_finite() && tail.is_finite()) {
            return None;
        }
        Some((ds - tail) / beta)
    }

    /// Euclidean norm of the scaled coordinate displacement; used only for
    /// neighbourhood radii, never as a metric.
    pub fn coordinate_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.wrap_delta(a, b)
            .iter()
            .zip(&self.axes)
            .map(|(d, axis)| (d * axis.scale).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn log_warp_variation(&self, delta: &[f64]) -> f64 {
        fn walk(node: &Node, delta: &[f64]) -> f64 {
            match node {
                Node::Axis(_) => 0.0,
                Node::Scaled(_, inner) => walk(inner, delta),
                Node::Product(items) => items.iter().map(|n| walk(n, delta)).sum(),
                Node::Warped { inner, fiber } => {
                    let own: f64 = fiber.iter().map(|(i, l)| l * delta[*i]).sum();
                    own.abs() + walk(inner, delta)
                }
            }
        }
        walk(&self.root, delta)
    }
}

pub(crate) fn wrap(d: f64, c: f64) -> f64 {
    let r = d.rem_euclid(c);
    if r > 0.5 * c {
        r - c
    } else {
        r
    }
}

fn has_warp(node: &Node) -> bool {
    match node {
        Node::Axis(_) => false,
        Node::Scaled(_, inner) => has_warp(inner),
        Node::Product(items) => items.iter().any(has_warp),
        Node::Warped { .. } => true,
    }
}

fn eval_node(node: &Node, pos: &[f64], delta: &[f64]) -> f64 {
    match node {
        Node::Axis(i) => delta[*i].abs(),
        Node::Scaled(f, inner) => f * eval_node(inner, pos, delta),
        Node::Product(items) => items
            .iter()
            .map(|n| eval_node(n, pos, delta).powi(2))
            .sum::<f64>()
            .sqrt(),
        Node::Warped { inner, fiber } => {
            let log_f: f64 = fiber.iter().map(|(i, l)| l * pos[*i]).sum();
            let horizontal = log_f.exp() * eval_node(inner, pos, delta);
            let vertical: f64 = fiber.iter().map(|(i, _)| delta[*i] * delta[*i]).sum();
            (horizontal * horizontal + vertical).sqrt()
        }
    }
}

fn build(
    desc: &SpaceDescriptor,
    scale: f64,
    axes: &mut Vec<Axis>,
    warped: &mut bool,
) -> Result<Node> {
    let mut push = |kind| {
        axes.push(Axis { kind, scale });
        Node::Axis(axes.len() - 1)
    };
    Ok(match desc {
        SpaceDescriptor::Line => push(AxisKind::Line),
        SpaceDescriptor::Interval { a, b } => push(AxisKind::Interval { a: *a, b: *b }),
        SpaceDescriptor::Circle { circumference } => push(AxisKind::Circle {
            circumference: *circumference,
        }),
        SpaceDescriptor::Scaled { factor, inner } => Node::Scaled(
            *factor,
            Box::new(build(inner, scale * factor, axes, warped)?),
        ),
        SpaceDescriptor::Product { factors } => Node::Product(
            factors
                .iter()
                .map(|f| build(f, scale, axes, warped))
                .collect::<Result<_>>()?,
        ),
        SpaceDescriptor::Warped { inner, warp } => {
            let inner = build(inner, scale, axes, warped)?;
            let mut fiber = Vec::with_capacity(warp.len());
            for (_, lambda) in warp.iter() {
                axes.push(Axis {
                    kind: AxisKind::Fiber,
                    scale,
                });
                fiber.push((axes.len() - 1, lambda.ln()));
            }
            if !fiber.is_empty() {
                *warped = true;
            }
            Node::Warped {
                inner: Box::new(inner),
                fiber,
            }
        }
        SpaceDescriptor::Cylinder(_) => return Err(Error::NotChart("cylinder".into())),
        SpaceDescriptor::Quotient(_) => return Err(Error::NotChart("quotient".into())),
    })
}
