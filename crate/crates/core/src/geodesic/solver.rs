//! Damped Newton minimization of discrete path energy in a single chart.
//!
//! Interior waypoints are the unknowns; the objective is Σ L_i² over the
//! coordinate-straight segments, whose minimizers are evenly spaced
//! discrete geodesics.  Gradients and per-segment Hessian blocks come from
//! central finite differences.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::chart::Chart;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Settings {
    pub n_waypoints: usize,
    pub max_iters: usize,
    pub step_tol: f64,
    pub restarts: usize,
    pub seed: u64,
    pub winding: i32,
}

#[derive(Clone, Debug)]
pub(crate) struct ChartSolution {
    /// Waypoints in lifted coordinates (circle axes unwrapped).
    pub coords: Vec<Vec<f64>>,
    /// Quadrature length of the polygonal path.
    pub length: f64,
    pub converged: bool,
    pub restarts_used: usize,
}

const COARSE_WAYPOINTS: usize = 9;

pub(crate) fn solve(chart: &Chart, a: &[f64], b: &[f64], s: &Settings) -> ChartSolution {
    let n = s.n_waypoints.max(2);
    let delta = chart.wrap_delta(a, b);
    let base_end: Vec<f64> = a.iter().zip(&delta).map(|(x, d)| x + d).collect();

    if delta.iter().all(|d| *d == 0.0) {
        return ChartSolution {
            coords: vec![a.to_vec(), a.to_vec()],
            length: 0.0,
            converged: true,
            restarts_used: 0,
        };
    }

    let circles: Vec<(usize, f64)> = chart
        .axes()
        .iter()
        .enumerate()
        .filter_map(|(i, ax)| ax.circumference().map(|c| (i, c)))
        .collect();

    let problem = Problem::new(chart, s);
    let mut best: Option<(Vec<Vec<f64>>, f64, bool)> = None;
    let mut best_end = base_end.clone();
    for lift in winding_classes(circles.len(), s.winding) {
        let mut end = base_end.clone();
        for ((axis, c), k) in circles.iter().zip(&lift) {
            end[*axis] += *k as f64 * c;
        }
        let init = linear(a, &end, coarse_count(n));
        let (path, converged) = problem.multilevel(init, n);
        let Some(len) = problem.admissible_length(&path) else {
            continue;
        };
        if best.as_ref().is_none_or(|(_, l, _)| len < *l) {
            best = Some((path, len, converged));
            best_end = end;
        }
    }
    let (mut coords, mut length, mut converged) = best.expect("the short-arc class is always admissible");

    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let sep = euclid(a, &best_end).max(f64::MIN_POSITIVE);
    let noise = Normal::new(0.0, 0.1 * sep).expect("finite sigma");
    for _ in 0..s.restarts {
        let mut init = linear(a, &best_end, coarse_count(n));
        let last = init.len() - 1;
        for p in &mut init[1..last] {
            for x in p.iter_mut() {
                *x += noise.sample(&mut rng);
            }
        }
        problem.clamp_path(&mut init);
        let (path, conv) = problem.multilevel(init, n);
        if let Some(len) = problem.admissible_length(&path) {
            if len < length {
                coords = path;
                length = len;
                converged = conv;
            }
        }
    }

    ChartSolution {
        coords,
        length,
        converged,
        restarts_used: s.restarts,
    }
}

fn coarse_count(n: usize) -> usize {
    n.min(COARSE_WAYPOINTS)
}

fn winding_classes(n_circles: usize, winding: i32) -> Vec<Vec<i32>> {
    let w = winding.max(0);
    let mut classes = vec![Vec::new()];
    for _ in 0..n_circles {
        let mut next = Vec::new();
        for c in &classes {
            // Offset 0 first so ties keep the shortest-arc class.
            for k in std::iter::once(0).chain((1..=w).flat_map(|k| [-k, k])) {
                let mut c = c.clone();
                c.push(k);
                next.push(c);
            }
        }
        classes = next;
    }
    classes
}

fn linear(a: &[f64], b: &[f64], n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let u = i as f64 / (n - 1) as f64;
            a.iter().zip(b).map(|(x, y)| x + u * (y - x)).collect()
        })
        .collect()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Resample a polyline at `n` evenly spaced index parameters.
fn resample(path: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let m = path.len() - 1;
    (0..n)
        .map(|i| {
            let u = i as f64 / (n - 1) as f64 * m as f64;
            let j = (u.floor() as usize).min(m - 1);
            let f = u - j as f64;
            path[j].iter().zip(&path[j + 1]).map(|(x, y)| x + f * (y - x)).collect()
        })
        .collect()
}

struct Problem<'a> {
    chart: &'a Chart,
    s: &'a Settings,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl<'a> Problem<'a> {
    fn new(chart: &'a Chart, s: &'a Settings) -> Self {
        let (lo, hi) = chart.axes().iter().map(|a| a.bounds()).unzip();
        Problem { chart, s, lo, hi }
    }

    fn dim(&self) -> usize {
        self.lo.len()
    }

    fn clamp_path(&self, path: &mut [Vec<f64>]) {
        for p in path {
            for (k, x) in p.iter_mut().enumerate() {
                *x = x.clamp(self.lo[k], self.hi[k]);
            }
        }
    }

    fn seg_len(&self, p: &[f64], q: &[f64]) -> f64 {
        let delta: Vec<f64> = p.iter().zip(q).map(|(x, y)| y - x).collect();
        self.chart.segment_length(p, &delta)
    }

    fn energy(&self, path: &[Vec<f64>]) -> f64 {
        path.windows(2).map(|w| self.seg_len(&w[0], &w[1]).powi(2)).sum()
    }

    /// Length of a lifted path, or `None` when some segment spans half a
    /// circle or more and would be read back along the other arc.
    fn admissible_length(&self, path: &[Vec<f64>]) -> Option<f64> {
        for w in path.windows(2) {
            for (k, ax) in self.chart.axes().iter().enumerate() {
                if let Some(c) = ax.circumference() {
                    if (w[1][k] - w[0][k]).abs() >= 0.5 * c {
                        return None;
                    }
                }
            }
        }
        Some(path.windows(2).map(|w| self.seg_len(&w[0], &w[1])).sum())
    }

    /// Solve on a coarse path, then repeatedly double the waypoint count.
    fn multilevel(&self, mut path: Vec<Vec<f64>>, n: usize) -> (Vec<Vec<f64>>, bool) {
        let mut converged;
        loop {
            converged = self.newton(&mut path);
            if path.len() >= n {
                break;
            }
            let doubled = 2 * path.len() - 1;
            path = if doubled <= n {
                resample(&path, doubled)
            } else {
                resample(&path, n)
            };
        }
        (path, converged)
    }

    fn newton(&self, path: &mut [Vec<f64>]) -> bool {
        let d = self.dim();
        let n = path.len();
        if n < 3 {
            return true;
        }
        let nv = (n - 2) * d;
        let sep = euclid(&path[0], &path[n - 1]).max(1e-12);
        let h_g = 1e-5 * sep;
        let h_h = 5e-3 * sep / (n - 1) as f64;

        let mut energy = self.energy(path);
        let mut mu = 0.0;
        for _ in 0..self.s.max_iters {
            let (g, hess) = self.derivatives(path, h_g, h_h);
            let x: Vec<f64> = path[1..n - 1].iter().flatten().copied().collect();
            let free: Vec<usize> = (0..nv)
                .filter(|&j| {
                    let k = j % d;
                    let at_lo = x[j] <= self.lo[k] + 1e-14 && g[j] > 0.0;
                    let at_hi = x[j] >= self.hi[k] - 1e-14 && g[j] < 0.0;
                    !(at_lo || at_hi)
                })
                .collect();
            if free.is_empty() {
                return true;
            }
            let diag_scale = free.iter().map(|&j| hess[(j, j)].abs()).sum::<f64>() / free.len() as f64;
            let diag_scale = diag_scale.max(1e-300);
            if mu == 0.0 {
                mu = 1e-10 * diag_scale;
            }

            let nf = free.len();
            let mut accepted = false;
            let mut tiny_step = false;
            for _ in 0..40 {
                let mut m = DMatrix::<f64>::zeros(nf, nf);
                let mut rhs = DVector::<f64>::zeros(nf);
                for (r, &i) in free.iter().enumerate() {
                    rhs[r] = -g[i];
                    for (c, &j) in free.iter().enumerate() {
                        m[(r, c)] = hess[(i, j)];
                    }
                    m[(r, r)] += mu;
                }
                let Some(chol) = m.cholesky() else {
                    mu = (mu * 10.0).max(1e-8 * diag_scale);
                    continue;
                };
                let step = chol.solve(&rhs);
                let mut trial = path.to_vec();
                let mut max_move: f64 = 0.0;
                for (r, &j) in free.iter().enumerate() {
                    let (w, k) = (1 + j / d, j % d);
                    let old = trial[w][k];
                    trial[w][k] = (old + step[r]).clamp(self.lo[k], self.hi[k]);
                    max_move = max_move.max((trial[w][k] - old).abs());
                }
                let e_trial = self.energy(&trial);
                if e_trial < energy {
                    path.clone_from_slice(&trial);
                    energy = e_trial;
                    mu = (mu / 3.0).max(1e-14 * diag_scale);
                    accepted = true;
                    tiny_step = max_move < self.s.step_tol;
                    break;
                }
                if max_move < self.s.step_tol {
                    // Below the energy noise floor: no representable descent left.
                    tiny_step = true;
                    break;
                }
                mu *= 4.0;
            }
            if tiny_step || !accepted {
                return tiny_step;
            }
        }
        false
    }

    /// Gradient and Hessian of the path energy with respect to interior
    /// waypoint coordinates.
    fn derivatives(&self, path: &[Vec<f64>], h_g: f64, h_h: f64) -> (Vec<f64>, DMatrix<f64>) {
        let d = self.dim();
        let n = path.len();
        let nv = (n - 2) * d;
        let mut g = vec![0.0; nv];
        let mut hess = DMatrix::<f64>::zeros(nv, nv);
        let mut local = vec![0.0; 2 * d];

        for seg in 0..n - 1 {
            let (p, q) = (&path[seg], &path[seg + 1]);
            local[..d].copy_from_slice(p);
            local[d..].copy_from_slice(q);
            // Global variable index for each local coordinate, if interior.
            let index = |l: usize| -> Option<usize> {
                let w = if l < d { seg } else { seg + 1 };
                (w >= 1 && w <= n - 2).then(|| (w - 1) * d + l % d)
            };
            let f = |v: &[f64]| self.seg_len(&v[..d], &v[d..]).powi(2);
            let f0 = f(&local);
            let mut v = local.clone();
            let mut f_plus = vec![0.0; 2 * d];

            for l in 0..2 * d {
                let Some(gi) = index(l) else { continue };
                v[l] = local[l] + h_g;
                let fp = f(&v);
                v[l] = local[l] - h_g;
                let fm = f(&v);
                v[l] = local[l];
                g[gi] += (fp - fm) / (2.0 * h_g);

                v[l] = local[l] + h_h;
                let fp = f(&v);
                v[l] = local[l] - h_h;
                let fm = f(&v);
                v[l] = local[l];
                f_plus[l] = fp;
                hess[(gi, gi)] += (fp - 2.0 * f0 + fm) / (h_h * h_h);
            }
            // Mixed partials by one-sided differences reusing f(x + h e_l):
            // the Hessian only shapes the step, the gradient stays central.
            for l in 0..2 * d {
                let Some(gi) = index(l) else { continue };
                for m in l + 1..2 * d {
                    let Some(gj) = index(m) else { continue };
                    v[l] = local[l] + h_h;
                    v[m] = local[m] + h_h;
                    let fpp = f(&v);
                    v[l] = local[l];
                    v[m] = local[m];
                    let val = (fpp - f_plus[l] - f_plus[m] + f0) / (h_h * h_h);
                    hess[(gi, gj)] += val;
                    hess[(gj, gi)] += val;
                }
            }
        }
        (g, hess)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::SpaceDescriptor;
    use crate::warp::WarpVector;

    fn settings() -> Settings {
        Settings {
            n_waypoints: 33,
            max_iters: 200,
            step_tol: 1e-8,
            restarts: 0,
            seed: 7,
            winding: 2,
        }
    }

    #[test]
    fn winding_classes_start_with_zero() {
        let c = winding_classes(2, 1);
        assert_eq!(c.len(), 9);
        assert_eq!(c[0], vec![0, 0]);
    }

    #[test]
    fn resample_keeps_endpoints() {
        let p = vec![vec![0.0], vec![1.0], vec![3.0]];
        let r = resample(&p, 5);
        assert_eq!(r[0], vec![0.0]);
        assert_eq!(r[4], vec![3.0]);
        assert_eq!(r[2], vec![1.0]);
    }

    #[test]
    fn hyperbolic_bow_goes_downhill() {
        let desc = SpaceDescriptor::warped(
            SpaceDescriptor::Line,
            WarpVector::single("e", std::f64::consts::E).unwrap(),
        );
        let chart = Chart::new(&desc).unwrap();
        let sol = solve(&chart, &[0.0, 0.0], &[1.0, 0.0], &settings());
        assert!(sol.converged);
        assert!((sol.length - 1.5f64.acosh()).abs() < 1e-4, "{}", sol.length);
        assert!(sol.coords[16][1] < -0.05);
    }
}
