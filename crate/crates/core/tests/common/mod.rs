//! Oracles shared by the integration tests.  Nothing here calls the
//! library's solver.

#![allow(dead_code)]

/// Length of the straight coordinate segment (x0,t0)→(x1,t1) in ℝ ×_λ ℝ by
/// composite Simpson's rule on `panels` panels.
pub fn warped_segment(lambda: f64, a: (f64, f64), b: (f64, f64), panels: usize) -> f64 {
    let (dx, dt) = (b.0 - a.0, b.1 - a.1);
    let speed = |s: f64| {
        let t = a.1 + s * dt;
        ((lambda.powf(t) * dx).powi(2) + dt * dt).sqrt()
    };
    let n = 2 * panels;
    let h = 1.0 / n as f64;
    let mut sum = speed(0.0) + speed(1.0);
    for i in 1..n {
        sum += speed(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

pub fn polyline_length(lambda: f64, path: &[(f64, f64)]) -> f64 {
    path.windows(2).map(|w| warped_segment(lambda, w[0], w[1], 4)).sum()
}

/// Brute-force discrete geodesic: Gauss-Seidel relaxation of each interior
/// waypoint on the local energy L_{i-1}² + L_i², doubling the waypoint
/// count from 9 up to `n`.  Returns the polyline length.
pub fn brute_force_distance(lambda: f64, p: (f64, f64), q: (f64, f64), n: usize) -> f64 {
    let mut path: Vec<(f64, f64)> = (0..9)
        .map(|i| {
            let s = i as f64 / 8.0;
            (p.0 + s * (q.0 - p.0), p.1 + s * (q.1 - p.1))
        })
        .collect();
    loop {
        relax(lambda, &mut path);
        if path.len() >= n {
            break;
        }
        let mut finer = Vec::with_capacity(2 * path.len() - 1);
        for w in path.windows(2) {
            finer.push(w[0]);
            finer.push(((w[0].0 + w[1].0) / 2.0, (w[0].1 + w[1].1) / 2.0));
        }
        finer.push(*path.last().unwrap());
        path = finer;
    }
    polyline_length(lambda, &path)
}

fn relax(lambda: f64, path: &mut [(f64, f64)]) {
    let local = |prev: (f64, f64), x: (f64, f64), next: (f64, f64)| {
        warped_segment(lambda, prev, x, 2).powi(2) + warped_segment(lambda, x, next, 2).powi(2)
    };
    for _sweep in 0..4000 {
        let mut moved: f64 = 0.0;
        for i in 1..path.len() - 1 {
            let (prev, cur, next) = (path[i - 1], path[i], path[i + 1]);
            let h = 1e-6 * (1.0 + cur.0.abs() + cur.1.abs());
            let f = |dx: f64, dt: f64| local(prev, (cur.0 + dx, cur.1 + dt), next);
            let f0 = f(0.0, 0.0);
            let gx = (f(h, 0.0) - f(-h, 0.0)) / (2.0 * h);
            let gt = (f(0.0, h) - f(0.0, -h)) / (2.0 * h);
            let hxx = (f(h, 0.0) - 2.0 * f0 + f(-h, 0.0)) / (h * h);
            let htt = (f(0.0, h) - 2.0 * f0 + f(0.0, -h)) / (h * h);
            let hxt = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
            let det = hxx * htt - hxt * hxt;
            if !(det > 0.0 && hxx > 0.0) {
                continue;
            }
            let mut step = ((htt * gx - hxt * gt) / det, (hxx * gt - hxt * gx) / det);
            // Backtrack so the local energy never increases.
            let mut accepted = false;
            for _ in 0..20 {
                if f(-step.0, -step.1) <= f0 {
                    accepted = true;
                    break;
                }
                step = (step.0 / 2.0, step.1 / 2.0);
            }
            if accepted {
                path[i] = (cur.0 - step.0, cur.1 - step.1);
                moved = moved.max(step.0.abs().max(step.1.abs()));
            }
        }
        if moved < 1e-11 {
            break;
        }
    }
}
