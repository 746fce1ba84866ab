//! Fast solvers for the flat five-point operator on the (s, θ) lattice.
//!
//! Every operator assembled here has the form
//!
//! ```text
//! (A x)ᵢⱼ = c_s Σ_{s-nbrs} (xᵢⱼ − x_nbr) + c_θ,ᵢ (2xᵢⱼ − xᵢ,ⱼ₋₁ − xᵢ,ⱼ₊₁) + shiftᵢ xᵢⱼ
//! ```
//!
//! which is diagonalized by a DFT in the periodic θ direction and leaves one
//! tridiagonal system in s per Fourier mode. The factorization is computed once
//! and reused for every right-hand side.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Boundary treatment of the first/last radial row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowBoundary {
    /// Row values are unknowns with natural (no-flux) coupling.
    Free,
    /// Row values are prescribed; the operator acts as the identity there.
    Fixed,
}

pub struct RowOperator {
    n_r: usize,
    n_t: usize,
    c_s: f64,
    c_t: Vec<f64>,
    shift: Vec<f64>,
    inner: RowBoundary,
    outer: RowBoundary,
    // inverse Thomas pivots, row-major (i, k)
    inv_pivot: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl RowOperator {
    pub fn new(
        n_r: usize,
        n_t: usize,
        c_s: f64,
        c_t: Vec<f64>,
        shift: Vec<f64>,
        inner: RowBoundary,
        outer: RowBoundary,
    ) -> Self {
        assert_eq!(c_t.len(), n_r);
        assert_eq!(shift.len(), n_r);
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n_t);
        let inv = planner.plan_fft_inverse(n_t);
        let lambda: Vec<f64> = (0..n_t)
            .map(|k| 2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / n_t as f64).cos())
            .collect();
        let mut op = RowOperator {
            n_r,
            n_t,
            c_s,
            c_t,
            shift,
            inner,
            outer,
            inv_pivot: vec![0.0; n_r * n_t],
            fwd,
            inv,
        };
        let (lo, hi) = op.free_range();
        let mut prev_pivot = vec![0.0; n_t];
        for i in lo..=hi {
            let diag_s = op.c_s * op.s_neighbours(i) as f64;
            for k in 0..n_t {
                let d = diag_s + op.c_t[i] * lambda[k] + op.shift[i];
                let m = if i == lo {
                    d
                } else {
                    d - op.c_s * op.c_s * prev_pivot[k]
                };
                prev_pivot[k] = 1.0 / m;
                op.inv_pivot[i * n_t + k] = 1.0 / m;
            }
        }
        op
    }

    pub fn len(&self) -> usize {
        self.n_r * self.n_t
    }

    fn free_range(&self) -> (usize, usize) {
        let lo = if self.inner == RowBoundary::Fixed { 1 } else { 0 };
        let hi = if self.outer == RowBoundary::Fixed {
            self.n_r - 2
        } else {
            self.n_r - 1
        };
        (lo, hi)
    }

    // Number of s-neighbours that contribute to the diagonal (fixed rows count).
    fn s_neighbours(&self, i: usize) -> usize {
        usize::from(i > 0) + usize::from(i + 1 < self.n_r)
    }

    fn is_fixed(&self, i: usize) -> bool {
        (i == 0 && self.inner == RowBoundary::Fixed)
            || (i + 1 == self.n_r && self.outer == RowBoundary::Fixed)
    }

    /// y = A x. Fixed rows map to themselves and do not couple to free rows.
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let (n_r, n_t) = (self.n_r, self.n_t);
        for i in 0..n_r {
            let row = &x[i * n_t..(i + 1) * n_t];
            let out = &mut y[i * n_t..(i + 1) * n_t];
            if self.is_fixed(i) {
                out.copy_from_slice(row);
                continue;
            }
            let diag = self.c_s * self.s_neighbours(i) as f64 + 2.0 * self.c_t[i] + self.shift[i];
            for j in 0..n_t {
                let jm = if j == 0 { n_t - 1 } else { j - 1 };
                let jp = if j + 1 == n_t { 0 } else { j + 1 };
                out[j] = row[j] * diag - (row[jm] + row[jp]) * self.c_t[i];
            }
            if i > 0 && !self.is_fixed(i - 1) {
                let below = &x[(i - 1) * n_t..i * n_t];
                for j in 0..n_t {
                    out[j] -= below[j] * self.c_s;
                }
            }
            if i + 1 < n_r && !self.is_fixed(i + 1) {
                let above = &x[(i + 1) * n_t..(i + 2) * n_t];
                for j in 0..n_t {
                    out[j] -= above[j] * self.c_s;
                }
            }
        }
    }

    /// Exact solve of A x = b (b is overwritten with x).
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let (n_r, n_t) = (self.n_r, self.n_t);
        let (lo, hi) = self.free_range();
        let free = &mut b[lo * n_t..(hi + 1) * n_t];
        self.fwd.process(free);
        // forward sweep
        for i in (lo + 1)..=hi {
            let (prev, cur) = b.split_at_mut(i * n_t);
            let prev = &prev[(i - 1) * n_t..];
            let piv = &self.inv_pivot[(i - 1) * n_t..i * n_t];
            for k in 0..n_t {
                cur[k] += prev[k] * (self.c_s * piv[k]);
            }
        }
        // back substitution
        {
            let piv = &self.inv_pivot[hi * n_t..(hi + 1) * n_t];
            let row = &mut b[hi * n_t..(hi + 1) * n_t];
            for k in 0..n_t {
                row[k] *= piv[k];
            }
        }
        for i in (lo..hi).rev() {
            let (cur, next) = b.split_at_mut((i + 1) * n_t);
            let cur = &mut cur[i * n_t..];
            let next = &next[..n_t];
            let piv = &self.inv_pivot[i * n_t..(i + 1) * n_t];
            for k in 0..n_t {
                cur[k] = (cur[k] + next[k] * self.c_s) * piv[k];
            }
        }
        let free = &mut b[lo * n_t..(hi + 1) * n_t];
        self.inv.process(free);
        let scale = 1.0 / n_t as f64;
        for v in free.iter_mut() {
            *v *= scale;
        }
        debug_assert!(n_r > 1);
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// Preconditioned conjugate gradients for `op`, preconditioned by its own FFT factorization.
///
/// Stops when ‖b − Ax‖ ≤ tol·‖b‖. Returns the number of iterations used.
pub fn pcg(op: &RowOperator, b: &[Complex64], x: &mut [Complex64], tol: f64, max_iter: usize) -> Result<usize> {
    let n = op.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        return Ok(0);
    }
    let mut ax = vec![Complex64::default(); n];
    op.apply(x, &mut ax);
    let mut r: Vec<Complex64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut z = r.clone();
    op.solve_in_place(&mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![Complex64::default(); n];
    for it in 0..max_iter {
        let rnorm = dot(&r, &r).sqrt();
        if rnorm <= tol * bnorm {
            return Ok(it);
        }
        op.apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            x[k] += p[k] * alpha;
            r[k] -= ap[k] * alpha;
        }
        z.copy_from_slice(&r);
        op.solve_in_place(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + p[k] * beta;
        }
    }
    let residual = dot(&r, &r).sqrt() / bnorm;
    if residual <= tol {
        Ok(max_iter)
    } else {
        Err(Error::SolverDiverged {
            iterations: max_iter,
            residual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(inner: RowBoundary, outer: RowBoundary, shift: f64) -> RowOperator {
        let n_r = 9;
        RowOperator::new(
            n_r,
            8,
            1.3,
            (0..n_r).map(|i| 0.5 + 0.1 * i as f64).collect(),
            vec![shift; n_r],
            inner,
            outer,
        )
    }

    fn sample(n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|k| Complex64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()))
            .collect()
    }

    #[test]
    fn direct_solve_inverts_apply() {
        for (inner, outer, shift) in [
            (RowBoundary::Free, RowBoundary::Free, 0.2),
            (RowBoundary::Fixed, RowBoundary::Fixed, 0.0),
            (RowBoundary::Free, RowBoundary::Fixed, 0.0),
        ] {
            let a = op(inner, outer, shift);
            let x = sample(a.len());
            let mut b = vec![Complex64::default(); a.len()];
            a.apply(&x, &mut b);
            a.solve_in_place(&mut b);
            let err = x.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
            assert!(err < 1e-11, "{inner:?}/{outer:?}: {err}");
        }
    }

    #[test]
    fn pcg_reaches_tolerance() {
        let a = op(RowBoundary::Fixed, RowBoundary::Free, 0.0);
        let b = sample(a.len());
        let mut x = vec![Complex64::default(); a.len()];
        let iters = pcg(&a, &b, &mut x, 1e-12, 20).unwrap();
        assert!(iters <= 3);
        let mut ax = vec![Complex64::default(); a.len()];
        a.apply(&x, &mut ax);
        let res: f64 = ax.iter().zip(&b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
        assert!(res < 1e-10);
    }
}
