//! Winding numbers, approximate bulk degree, vortex detection and the
//! current potential.
//!
//! The discrete supercurrent lives on edges: for an edge from `a` to `b` of
//! length `h` (in s or θ) it is `|u_a||u_b| arg(ū_a u_b) / h`. For unimodular
//! fields this is the exact phase derivative whenever the per-edge phase jump
//! is below π, which makes winding fields integral on the nose.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use crate::domain::Contour;
use crate::domain::{ScalarField, SOLVER_MAX_ITER, SOLVER_TOL};
use crate::error::{Error, Result};
use crate::field::{energy, l2_distance, ComplexField};
use crate::linalg::{pcg, RowBoundary, RowOperator};

/// Smallest modulus at which a contour phase is considered defined.
pub const DEGREE_MODULUS_FLOOR: f64 = 1e-6;

/// Default modulus threshold for vortex detection.
pub const DEFAULT_VORTEX_THRESHOLD: f64 = 0.5;

#[inline]
fn phase_step(a: Complex64, b: Complex64) -> f64 {
    (a.conj() * b).arg()
}

#[inline]
fn edge_current(a: Complex64, b: Complex64, h: f64) -> f64 {
    a.norm() * b.norm() * phase_step(a, b) / h
}

/// Unrounded winding of `u` along the contour.
pub fn winding(u: &ComplexField, contour: &Contour) -> Result<f64> {
    let n = contour.nodes.len();
    for &(i, j) in &contour.nodes {
        let modulus = u.at(i, j).norm();
        if modulus <= DEGREE_MODULUS_FLOOR {
            return Err(Error::DegreeUndefined { i, j, modulus });
        }
    }
    let total: f64 = (0..n)
        .map(|k| {
            let (i0, j0) = contour.nodes[k];
            let (i1, j1) = contour.nodes[(k + 1) % n];
            phase_step(u.at(i0, j0), u.at(i1, j1))
        })
        .sum();
    Ok(total / (2.0 * PI))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Degree {
    pub degree: i32,
    /// |raw winding − degree| before rounding.
    pub deviation: f64,
}

pub fn boundary_degree_report(u: &ComplexField, contour: &Contour) -> Result<Degree> {
    let w = winding(u, contour)?;
    let degree = w.round();
    Ok(Degree {
        degree: degree as i32,
        deviation: (w - degree).abs(),
    })
}

pub fn boundary_degree(u: &ComplexField, contour: &Contour) -> Result<i32> {
    boundary_degree_report(u, contour).map(|d| d.degree)
}

/// Degrees on the inner and outer circles, as (p, q).
pub fn boundary_degrees(u: &ComplexField) -> Result<(i32, i32)> {
    let p = boundary_degree(u, &Contour::inner(&u.mesh))?;
    let q = boundary_degree(u, &Contour::outer(&u.mesh))?;
    Ok((p, q))
}

/// Nodal currents (j_s, j_θ): averages of the adjacent edge currents.
fn nodal_currents(u: &ComplexField) -> (Vec<f64>, Vec<f64>) {
    let m = &u.mesh;
    let (n_r, n_t) = (m.n_r(), m.n_t());
    let (hs, ht) = (m.h_s(), m.h_theta());
    let mut js = vec![0.0; m.len()];
    let mut jt = vec![0.0; m.len()];
    for i in 0..n_r {
        let row = u.row(i);
        let edge: Vec<f64> = (0..n_t)
            .map(|j| edge_current(row[j], row[(j + 1) % n_t], ht))
            .collect();
        for j in 0..n_t {
            jt[i * n_t + j] = 0.5 * (edge[j] + edge[(j + n_t - 1) % n_t]);
        }
    }
    let s_edges: Vec<f64> = (0..(n_r - 1) * n_t)
        .map(|k| edge_current(u.values[k], u.values[k + n_t], hs))
        .collect();
    for i in 0..n_r {
        for j in 0..n_t {
            let below = (i > 0).then(|| s_edges[(i - 1) * n_t + j]);
            let above = (i + 1 < n_r).then(|| s_edges[i * n_t + j]);
            js[i * n_t + j] = match (below, above) {
                (Some(a), Some(b)) => 0.5 * (a + b),
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => 0.0,
            };
        }
    }
    (js, jt)
}

/// Approximate bulk degree by area quadrature of the current against ∇V.
pub fn abdeg(u: &ComplexField, v: &ScalarField) -> Result<f64> {
    if !(Arc::ptr_eq(&u.mesh, &v.mesh) || *u.mesh == *v.mesh) {
        return Err(Error::MeshMismatch);
    }
    let m = &u.mesh;
    let (js, jt) = nodal_currents(u);
    let mut acc = 0.0;
    for i in 0..m.n_r() {
        let mut row = 0.0;
        for j in 0..m.n_t() {
            let (vs, vt) = v.gradient_s_theta(i, j);
            let k = m.index(i, j);
            row += vs * jt[k] - vt * js[k];
        }
        acc += m.weight(i) * row;
    }
    Ok(acc * m.h_s() * m.h_theta() / (2.0 * PI))
}

/// Approximate bulk degree as the radial average of the winding integrand
/// over concentric circles (valid on circular annuli).
pub fn abdeg_radial(u: &ComplexField) -> f64 {
    let m = &u.mesh;
    let n_t = m.n_t();
    let ht = m.h_theta();
    let mut acc = 0.0;
    for i in 0..m.n_r() {
        let row = u.row(i);
        let circ: f64 = (0..n_t)
            .map(|j| edge_current(row[j], row[(j + 1) % n_t], ht) * ht)
            .sum();
        acc += m.weight(i) * circ;
    }
    acc * m.h_s() / (2.0 * PI * m.annulus().log_ratio())
}

/// Right side of the continuity estimate
/// `|abdeg(u) − abdeg(v)| ≤ (1/π)‖V‖_{C¹}(√E(u) + √E(v))‖u − v‖_{L²}`.
pub fn abdeg_lipschitz_bound(u: &ComplexField, w: &ComplexField, eps: f64, v: &ScalarField) -> Result<f64> {
    let dist = l2_distance(u, w)?;
    let eu = energy(u, eps).total;
    let ew = energy(w, eps).total;
    Ok(v.c1_norm() * (eu.sqrt() + ew.sqrt()) * dist / PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vortex {
    pub x: f64,
    pub y: f64,
    pub winding: i32,
    pub boundary_distance: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VortexSet {
    pub entries: Vec<Vortex>,
}

impl VortexSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_winding(&self) -> i32 {
        self.entries.iter().map(|v| v.winding).sum()
    }

    pub fn min_boundary_distance(&self) -> Option<f64> {
        self.entries
            .iter()
            .map(|v| v.boundary_distance)
            .min_by(|a, b| a.total_cmp(b))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("vortex set serializes")
    }
}

/// Winding of every plaquette `(i, j)–(i+1, j)–(i+1, j+1)–(i, j+1)`.
pub fn plaquette_windings(u: &ComplexField) -> Vec<i32> {
    let m = &u.mesh;
    let (n_r, n_t) = (m.n_r(), m.n_t());
    let mut out = vec![0; (n_r - 1) * n_t];
    for i in 0..n_r - 1 {
        for j in 0..n_t {
            let jp = (j + 1) % n_t;
            let a = u.at(i, j);
            let b = u.at(i + 1, j);
            let c = u.at(i + 1, jp);
            let d = u.at(i, jp);
            let w = phase_step(a, b) + phase_step(b, c) + phase_step(c, d) + phase_step(d, a);
            out[i * n_t + j] = (w / (2.0 * PI)).round() as i32;
        }
    }
    out
}

/// Clusters nonzero plaquette windings (8-connected, periodic in θ) and
/// keeps clusters with nonzero total winding whose smallest modulus is below
/// `threshold`. The modulus is that of the field interpolated linearly along
/// plaquette edges, so a core squeezed between two grid lines (a phase jump
/// near π across one edge) still registers. Each plaquette is located at the
/// zero of its bilinear interpolant when that lies inside the cell, else at
/// its centre; a cluster reports the winding-weighted centroid.
pub fn find_vortices(u: &ComplexField, threshold: f64) -> Result<VortexSet> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidParameter {
            name: "modulus_threshold",
            reason: format!("need 0 < threshold < 1, got {threshold}"),
        });
    }
    let m = &u.mesh;
    let (n_r, n_t) = (m.n_r(), m.n_t());
    let rows = n_r - 1;
    let wind = plaquette_windings(u);
    let mut seen = vec![false; wind.len()];
    let mut entries = Vec::new();
    let mut stack = Vec::new();
    for start in 0..wind.len() {
        if wind[start] == 0 || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut total = 0;
        let mut weight = 0.0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        let mut min_mod = f64::INFINITY;
        while let Some(k) = stack.pop() {
            let (i, j) = (k / n_t, k % n_t);
            let w = wind[k];
            total += w;
            let jp = (j + 1) % n_t;
            let corners = [u.at(i, j), u.at(i + 1, j), u.at(i + 1, jp), u.at(i, jp)];
            let (fs, ft) = bilinear_zero(corners).unwrap_or((0.5, 0.5));
            let r = (m.s(i) + fs * m.h_s()).exp();
            let t = m.theta(j) + ft * m.h_theta();
            let aw = w.unsigned_abs() as f64;
            cx += aw * r * t.cos();
            cy += aw * r * t.sin();
            weight += aw;
            for e in 0..4 {
                min_mod = min_mod.min(segment_min_modulus(corners[e], corners[(e + 1) % 4]));
            }
            for di in -1i64..=1 {
                let ni = i as i64 + di;
                if ni < 0 || ni >= rows as i64 {
                    continue;
                }
                for dj in -1i64..=1 {
                    let nj = (j as i64 + dj).rem_euclid(n_t as i64) as usize;
                    let nk = ni as usize * n_t + nj;
                    if wind[nk] != 0 && !seen[nk] {
                        seen[nk] = true;
                        stack.push(nk);
                    }
                }
            }
        }
        if total != 0 && min_mod < threshold {
            let (x, y) = (cx / weight, cy / weight);
            let r = x.hypot(y);
            entries.push(Vortex {
                x,
                y,
                winding: total,
                boundary_distance: m.annulus().boundary_distance(r).max(0.0),
            });
        }
    }
    Ok(VortexSet { entries })
}

/// min over t ∈ [0, 1] of |a + t(b − a)|.
fn segment_min_modulus(a: Complex64, b: Complex64) -> f64 {
    let e = b - a;
    let len2 = e.norm_sqr();
    if len2 == 0.0 {
        return a.norm();
    }
    let t = (-(a.conj() * e).re / len2).clamp(0.0, 1.0);
    (a + e * t).norm()
}

/// Zero of `a(1−x)(1−y) + b·x(1−y) + c·xy + d(1−x)y` in the unit square,
/// corners ordered (0,0), (1,0), (1,1), (0,1).
fn bilinear_zero([a, b, c, d]: [Complex64; 4]) -> Option<(f64, f64)> {
    let (mut x, mut y) = (0.5, 0.5);
    for _ in 0..50 {
        let f = a * (1.0 - x) * (1.0 - y) + b * x * (1.0 - y) + c * x * y + d * (1.0 - x) * y;
        let fx = (b - a) * (1.0 - y) + (c - d) * y;
        let fy = (d - a) * (1.0 - x) + (c - b) * x;
        // solve [fx fy] (dx, dy) = f over the reals
        let det = fx.re * fy.im - fx.im * fy.re;
        if det.abs() < 1e-300 {
            return None;
        }
        let dx = (f.re * fy.im - f.im * fy.re) / det;
        let dy = (fx.re * f.im - fx.im * f.re) / det;
        x -= dx;
        y -= dy;
        if !(x.is_finite() && y.is_finite()) || x.abs() > 10.0 || y.abs() > 10.0 {
            return None;
        }
        if dx.abs().max(dy.abs()) < 1e-13 {
            let inside = (-1e-9..=1.0 + 1e-9).contains(&x) && (-1e-9..=1.0 + 1e-9).contains(&y);
            return inside.then_some((x.clamp(0.0, 1.0), y.clamp(0.0, 1.0)));
        }
    }
    None
}

#[derive(Debug, Clone)]
pub struct CurrentPotential {
    pub h: ScalarField,
    /// Mean of h on the inner circle.
    pub inner_trace: f64,
    /// max − min of h on the inner circle.
    pub inner_deviation: f64,
}

/// Least-squares solution of ∇⊥h = (u×∂₁u, u×∂₂u) with h = 1 on the outer
/// circle and a free trace on the inner circle.
pub fn current_potential(u: &ComplexField) -> Result<CurrentPotential> {
    u.check_admissible()?;
    let m = &u.mesh;
    let (n_r, n_t) = (m.n_r(), m.n_t());
    let (hs, ht) = (m.h_s(), m.h_theta());
    let (c_s, c_t) = m.edge_couplings();
    let (js, jt) = nodal_currents(u);
    // normal equations of Σ c_e (Δh − h_e T_e)²
    let mut b = vec![Complex64::default(); m.len()];
    for i in 0..n_r {
        for j in 0..n_t {
            let k = m.index(i, j);
            let kp = m.index(i, (j + 1) % n_t);
            let t_theta = -0.5 * (js[k] + js[kp]);
            let f = c_t[i] * ht * t_theta;
            b[kp].re += f;
            b[k].re -= f;
            if i + 1 < n_r {
                let ku = m.index(i + 1, j);
                let f = c_s * hs * 0.5 * (jt[k] + jt[ku]);
                b[ku].re += f;
                b[k].re -= f;
            }
        }
    }
    for j in 0..n_t {
        b[m.index(n_r - 1, j)] = Complex64::new(1.0, 0.0);
        b[m.index(n_r - 2, j)].re += c_s;
    }
    let op = RowOperator::new(n_r, n_t, c_s, c_t, vec![0.0; n_r], RowBoundary::Free, RowBoundary::Fixed);
    let mut x = b.clone();
    op.solve_in_place(&mut x);
    pcg(&op, &b, &mut x, SOLVER_TOL, SOLVER_MAX_ITER)?;
    let h = ScalarField {
        mesh: m.clone(),
        values: x.iter().map(|z| z.re).collect(),
    };
    let inner = h.row(0);
    let lo = inner.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = inner.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let inner_trace = inner.iter().sum::<f64>() / n_t as f64;
    Ok(CurrentPotential {
        h,
        inner_trace,
        inner_deviation: hi - lo,
    })
}

/// (1/2π)∫∇h·∇V.
pub fn abdeg_from_potential(h: &ScalarField, v: &ScalarField) -> f64 {
    h.dirichlet_pairing(v) / (2.0 * PI)
}
