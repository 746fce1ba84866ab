//! Gauss-Legendre rules and an adaptive tensor-product integrator, used to
//! evaluate energies of closed-form maps without a grid.

use std::f64::consts::PI;

/// Nodes and weights of the n-point Gauss-Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// A fixed rule mapped onto intervals.
#[derive(Debug, Clone)]
pub struct Rule {
    x: Vec<f64>,
    w: Vec<f64>,
}

impl Rule {
    pub fn new(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        Rule { x, w }
    }

    /// (node, weight) pairs on [a, b].
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        self.x.iter().zip(&self.w).map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.on(a, b).map(|(x, w)| w * f(x)).sum()
    }

    fn integrate_2d(&self, cell: [f64; 4], f: &impl Fn(f64, f64) -> f64) -> f64 {
        let [x0, x1, y0, y1] = cell;
        let mut acc = 0.0;
        for (x, wx) in self.on(x0, x1) {
            for (y, wy) in self.on(y0, y1) {
                acc += wx * wy * f(x, y);
            }
        }
        acc
    }
}

/// Adaptive integration of `f` over the rectangle `[x0, x1] × [y0, y1]`.
///
/// Cells are split in four until the refined estimate agrees with the coarse
/// one to `tol` scaled by the cell's share of the total area. `initial`
/// gives the number of starting cells per direction.
pub fn adaptive_2d(f: impl Fn(f64, f64) -> f64, rect: [f64; 4], initial: (usize, usize), tol: f64) -> f64 {
    adaptive_2d_forced(f, rect, initial, tol, |_| false)
}

/// As [`adaptive_2d`], but cells for which `force` returns true are always
/// split; used to make sure narrow features are seen by the rule.
pub fn adaptive_2d_forced(
    f: impl Fn(f64, f64) -> f64,
    rect: [f64; 4],
    initial: (usize, usize),
    tol: f64,
    force: impl Fn([f64; 4]) -> bool,
) -> f64 {
    let rule = Rule::new(6);
    let [x0, x1, y0, y1] = rect;
    let area = (x1 - x0) * (y1 - y0);
    let mut stack = Vec::new();
    for i in 0..initial.0 {
        for j in 0..initial.1 {
            let xa = x0 + (x1 - x0) * i as f64 / initial.0 as f64;
            let xb = x0 + (x1 - x0) * (i + 1) as f64 / initial.0 as f64;
            let ya = y0 + (y1 - y0) * j as f64 / initial.1 as f64;
            let yb = y0 + (y1 - y0) * (j + 1) as f64 / initial.1 as f64;
            let cell = [xa, xb, ya, yb];
            stack.push((cell, rule.integrate_2d(cell, &f), 0u32));
        }
    }
    let mut total = 0.0;
    while let Some((cell, coarse, depth)) = stack.pop() {
        let [a, b, c, d] = cell;
        let (mx, my) = (0.5 * (a + b), 0.5 * (c + d));
        let kids = [[a, mx, c, my], [mx, b, c, my], [a, mx, my, d], [mx, b, my, d]];
        let vals = kids.map(|k| rule.integrate_2d(k, &f));
        let fine: f64 = vals.iter().sum();
        let share = (b - a) * (d - c) / area;
        let converged = (fine - coarse).abs() <= tol * share.max(1e-6) && !force(cell);
        if converged || depth >= 40 {
            total += fine;
        } else {
            for (k, v) in kids.into_iter().zip(vals) {
                stack.push((k, v, depth + 1));
            }
        }
    }
    total
}
