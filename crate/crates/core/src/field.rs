//! Complex order parameter on the mesh, the GL energy and its gradient.
//!
//! The discrete energy is
//!
//! ```text
//! E = ½ Σ_edges c_e |u_a − u_b|² + (1/4ε²) Σ_nodes m_i (|u|² − 1)²
//! ```
//!
//! with flat (s, θ) edge weights `c_e` and trapezoid node masses
//! `m_i = w_i h_s h_θ r_i²`. Its exact derivative is used everywhere, so the
//! finite-difference check holds to round-off.

use std::fmt::Write as _;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::Mesh;
use crate::error::{Error, Result};

/// Boundary modulus tolerance of the admissible class.
pub const ADMISSIBLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct ComplexField {
    pub mesh: Arc<Mesh>,
    pub values: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub dirichlet: f64,
    pub potential: f64,
    pub total: f64,
    pub epsilon: f64,
}

impl EnergyReport {
    fn new(dirichlet: f64, potential: f64, epsilon: f64) -> Self {
        EnergyReport {
            dirichlet,
            potential,
            total: dirichlet + potential,
            epsilon,
        }
    }
}

impl ComplexField {
    pub fn new(mesh: &Arc<Mesh>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::MeshMismatch);
        }
        if let Some(k) = values.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidParameter {
                name: "values",
                reason: format!("non-finite value at node {k}"),
            });
        }
        Ok(ComplexField {
            mesh: mesh.clone(),
            values,
        })
    }

    pub fn constant(mesh: &Arc<Mesh>, c: Complex64) -> Self {
        ComplexField {
            mesh: mesh.clone(),
            values: vec![c; mesh.len()],
        }
    }

    /// Samples `f(r, θ)`.
    pub fn from_polar(mesh: &Arc<Mesh>, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let mut values = Vec::with_capacity(mesh.len());
        for i in 0..mesh.n_r() {
            let r = mesh.r(i);
            for j in 0..mesh.n_t() {
                values.push(f(r, mesh.theta(j)));
            }
        }
        ComplexField {
            mesh: mesh.clone(),
            values,
        }
    }

    /// Samples `f(z)` at the physical node positions.
    pub fn from_fn(mesh: &Arc<Mesh>, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self::from_polar(mesh, |r, t| f(Complex64::from_polar(r, t)))
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[self.mesh.index(i, j)]
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        let n = self.mesh.n_t();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn same_mesh(&self, other: &ComplexField) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) || *self.mesh == *other.mesh
    }

    /// Largest | |u| − 1 | over both boundary rows, with its location.
    pub fn boundary_deviation(&self) -> (f64, usize, usize) {
        let last = self.mesh.n_r() - 1;
        let mut worst = (0.0, 0, 0);
        for i in [0, last] {
            for (j, z) in self.row(i).iter().enumerate() {
                let dev = (z.norm() - 1.0).abs();
                if dev > worst.0 {
                    worst = (dev, i, j);
                }
            }
        }
        worst
    }

    pub fn is_admissible(&self) -> bool {
        self.boundary_deviation().0 <= ADMISSIBLE_TOL
    }

    pub fn check_admissible(&self) -> Result<()> {
        let (deviation, i, j) = self.boundary_deviation();
        if deviation > ADMISSIBLE_TOL {
            return Err(Error::NotAdmissible { i, j, deviation });
        }
        Ok(())
    }

    pub fn min_modulus(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min)
    }

    /// Pointwise product (used to insert factors into a field).
    pub fn multiply(&self, other: &ComplexField) -> Result<ComplexField> {
        if !self.same_mesh(other) {
            return Err(Error::MeshMismatch);
        }
        Ok(ComplexField {
            mesh: self.mesh.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        })
    }

    /// Multiplies every value by a unimodular constant so that the node
    /// `(R₂, θ = 0)` has phase zero.
    pub fn align_phase(&mut self) {
        let z = self.at(self.mesh.n_r() - 1, 0);
        if z.norm() > 0.0 {
            let rot = z.conj() / z.norm();
            self.values.iter_mut().for_each(|v| *v *= rot);
        }
    }

    /// CSV with header `s,theta,re,im`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "s,theta,re,im")?;
        let m = &self.mesh;
        let mut line = String::new();
        for i in 0..m.n_r() {
            for j in 0..m.n_t() {
                let z = self.at(i, j);
                line.clear();
                let _ = writeln!(line, "{},{},{},{}", m.s(i), m.theta(j), z.re, z.im);
                out.write_all(line.as_bytes())?;
            }
        }
        Ok(())
    }
}

/// Σ m Re(ā b): the discrete L² pairing.
pub fn inner(mesh: &Mesh, a: &[Complex64], b: &[Complex64]) -> f64 {
    let n_t = mesh.n_t();
    let mut acc = 0.0;
    for i in 0..mesh.n_r() {
        let ra = &a[i * n_t..(i + 1) * n_t];
        let rb = &b[i * n_t..(i + 1) * n_t];
        let s: f64 = ra.iter().zip(rb).map(|(x, y)| x.re * y.re + x.im * y.im).sum();
        acc += mesh.mass(i) * s;
    }
    acc
}

pub fn l2_norm(u: &ComplexField) -> f64 {
    inner(&u.mesh, &u.values, &u.values).sqrt()
}

pub fn l2_distance(u: &ComplexField, v: &ComplexField) -> Result<f64> {
    if !u.same_mesh(v) {
        return Err(Error::MeshMismatch);
    }
    let d: Vec<Complex64> = u.values.iter().zip(&v.values).map(|(a, b)| a - b).collect();
    Ok(inner(&u.mesh, &d, &d).sqrt())
}

pub fn energy(u: &ComplexField, eps: f64) -> EnergyReport {
    energy_of(&u.mesh, &u.values, eps)
}

pub(crate) fn energy_of(mesh: &Mesh, u: &[Complex64], eps: f64) -> EnergyReport {
    let (n_r, n_t) = (mesh.n_r(), mesh.n_t());
    let (c_s, c_t) = mesh.edge_couplings();
    let mut dir = 0.0;
    let mut pot = 0.0;
    for i in 0..n_r {
        let row = &u[i * n_t..(i + 1) * n_t];
        let mut t_sum = (row[0] - row[n_t - 1]).norm_sqr();
        for j in 1..n_t {
            t_sum += (row[j] - row[j - 1]).norm_sqr();
        }
        dir += c_t[i] * t_sum;
        if i + 1 < n_r {
            let up = &u[(i + 1) * n_t..(i + 2) * n_t];
            let s_sum: f64 = row.iter().zip(up).map(|(a, b)| (b - a).norm_sqr()).sum();
            dir += c_s * s_sum;
        }
        let p_sum: f64 = row
            .iter()
            .map(|z| {
                let q = z.norm_sqr() - 1.0;
                q * q
            })
            .sum();
        pot += mesh.mass(i) * p_sum;
    }
    EnergyReport::new(0.5 * dir, pot / (4.0 * eps * eps), eps)
}

/// `E(u + δ) − E(u)` evaluated term by term, free of the cancellation that
/// differencing two totals suffers near a minimum.
pub(crate) fn energy_change(mesh: &Mesh, u: &[Complex64], delta: &[Complex64], eps: f64) -> f64 {
    let (n_r, n_t) = (mesh.n_r(), mesh.n_t());
    let (c_s, c_t) = mesh.edge_couplings();
    let edge = |ea: Complex64, de: Complex64| 2.0 * (ea.conj() * de).re + de.norm_sqr();
    let mut dir = 0.0;
    let mut pot = 0.0;
    for i in 0..n_r {
        let row = &u[i * n_t..(i + 1) * n_t];
        let drow = &delta[i * n_t..(i + 1) * n_t];
        let mut t_sum = edge(row[0] - row[n_t - 1], drow[0] - drow[n_t - 1]);
        for j in 1..n_t {
            t_sum += edge(row[j] - row[j - 1], drow[j] - drow[j - 1]);
        }
        dir += c_t[i] * t_sum;
        if i + 1 < n_r {
            let up = &u[(i + 1) * n_t..(i + 2) * n_t];
            let dup = &delta[(i + 1) * n_t..(i + 2) * n_t];
            let mut s_sum = 0.0;
            for j in 0..n_t {
                s_sum += edge(up[j] - row[j], dup[j] - drow[j]);
            }
            dir += c_s * s_sum;
        }
        let mut p_sum = 0.0;
        for j in 0..n_t {
            let q = row[j].norm_sqr() - 1.0;
            let dq = 2.0 * (row[j].conj() * drow[j]).re + drow[j].norm_sqr();
            p_sum += dq * (2.0 * q + dq);
        }
        pot += mesh.mass(i) * p_sum;
    }
    0.5 * dir + pot / (4.0 * eps * eps)
}

/// Energy together with its raw derivative `G` (so that dE = Σ Re(Ḡ δu)).
/// `G` is neither mass-scaled nor projected.
pub(crate) fn energy_gradient(mesh: &Mesh, u: &[Complex64], eps: f64, g: &mut [Complex64]) -> EnergyReport {
    let (n_r, n_t) = (mesh.n_r(), mesh.n_t());
    let (c_s, c_t) = mesh.edge_couplings();
    let inv_eps2 = 1.0 / (eps * eps);
    let mut dir = 0.0;
    let mut pot = 0.0;
    for i in 0..n_r {
        let row = &u[i * n_t..(i + 1) * n_t];
        let m = mesh.mass(i);
        let ct = c_t[i];
        let out = &mut g[i * n_t..(i + 1) * n_t];
        for j in 0..n_t {
            let jm = if j == 0 { n_t - 1 } else { j - 1 };
            let jp = if j + 1 == n_t { 0 } else { j + 1 };
            let z = row[j];
            let q = z.norm_sqr() - 1.0;
            pot += m * q * q;
            let e = z - row[jm];
            dir += ct * e.norm_sqr();
            out[j] = (z * 2.0 - row[jm] - row[jp]) * ct + z * (m * q * inv_eps2);
        }
        if i > 0 {
            let below = &u[(i - 1) * n_t..i * n_t];
            for j in 0..n_t {
                let e = row[j] - below[j];
                dir += c_s * e.norm_sqr();
                out[j] += e * c_s;
            }
        }
        if i + 1 < n_r {
            let above = &u[(i + 1) * n_t..(i + 2) * n_t];
            for j in 0..n_t {
                out[j] += (row[j] - above[j]) * c_s;
            }
        }
    }
    EnergyReport::new(0.5 * dir, 0.25 * pot * inv_eps2, eps)
}

/// Keeps only the tangential part `i u Im(ū g)/|u|²` on both boundary rows.
pub(crate) fn project_boundary(mesh: &Mesh, u: &[Complex64], g: &mut [Complex64]) {
    let n_t = mesh.n_t();
    for i in [0, mesh.n_r() - 1] {
        for k in i * n_t..(i + 1) * n_t {
            let z = u[k];
            let n2 = z.norm_sqr();
            if n2 > 0.0 {
                let a = (z.conj() * g[k]).im / n2;
                g[k] = Complex64::new(0.0, a) * z;
            } else {
                g[k] = Complex64::default();
            }
        }
    }
}

/// Discrete L² gradient of the energy: −Δu + ε⁻²u(|u|²−1) in the interior,
/// its tangential part on the boundary circles.
pub fn gl_gradient(u: &ComplexField, eps: f64) -> Result<ComplexField> {
    u.check_admissible()?;
    let mesh = &u.mesh;
    let mut g = vec![Complex64::default(); mesh.len()];
    energy_gradient(mesh, &u.values, eps, &mut g);
    let n_t = mesh.n_t();
    for i in 0..mesh.n_r() {
        let inv_m = 1.0 / mesh.mass(i);
        g[i * n_t..(i + 1) * n_t].iter_mut().for_each(|v| *v *= inv_m);
    }
    project_boundary(mesh, &u.values, &mut g);
    Ok(ComplexField {
        mesh: mesh.clone(),
        values: g,
    })
}

pub(crate) fn renormalize_rows(mesh: &Mesh, u: &mut [Complex64]) -> Result<()> {
    let n_t = mesh.n_t();
    for i in [0, mesh.n_r() - 1] {
        for j in 0..n_t {
            let z = &mut u[i * n_t + j];
            let n = z.norm();
            if !(n > 0.0) {
                return Err(Error::ZeroOnBoundary { i, j });
            }
            *z /= n;
        }
    }
    Ok(())
}

/// Boundary values replaced by `u/|u|`; interior untouched.
pub fn renormalize_boundary(u: &ComplexField) -> Result<ComplexField> {
    let mut out = u.clone();
    renormalize_rows(&u.mesh, &mut out.values)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Annulus, Grid};
    use std::f64::consts::PI;

    fn mesh(n_r: usize, n_t: usize) -> Arc<Mesh> {
        Mesh::new(Annulus::reference(), Grid::new(n_r, n_t).unwrap())
    }

    #[test]
    fn constant_one_has_zero_energy_and_gradient() {
        let m = mesh(20, 40);
        let u = ComplexField::constant(&m, Complex64::new(1.0, 0.0));
        let e = energy(&u, 0.1);
        assert_eq!(e.total, 0.0);
        let g = gl_gradient(&u, 0.1).unwrap();
        assert!(g.values.iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn vortex_free_winding_energy() {
        let m = mesh(65, 512);
        for d in [1i32, 2] {
            let u = ComplexField::from_polar(&m, |_, t| Complex64::from_polar(1.0, d as f64 * t));
            let e = energy(&u, 0.1);
            let exact = PI * (d * d) as f64;
            // chord vs arc: ½ Σ (2 sin(dh/2))² / h  per row
            assert!((e.dirichlet - exact).abs() / exact < 1e-3, "{}", e.dirichlet);
            assert!(e.potential < 1e-20);
            assert_eq!(e.total, e.dirichlet + e.potential);
        }
    }

    #[test]
    fn zero_field_potential_is_area() {
        let m = mesh(129, 64);
        let u = ComplexField::constant(&m, Complex64::default());
        let eps = 0.1;
        let e = energy(&u, eps);
        let exact = m.annulus().area() / (4.0 * eps * eps);
        assert!((e.potential - exact).abs() / exact < 1e-4);
        assert_eq!(e.dirichlet, 0.0);
    }

    #[test]
    fn winding_residual_is_inverse_square_radius() {
        let m = mesh(257, 512);
        let u = ComplexField::from_polar(&m, |_, t| Complex64::from_polar(1.0, t));
        let g = gl_gradient(&u, 0.05).unwrap();
        for i in [5, 64, 128, 250] {
            let r = m.r(i);
            let got = g.at(i, 7).norm();
            assert!((got * r * r - 1.0).abs() < 1e-3, "row {i}: {got} vs {}", 1.0 / (r * r));
        }
    }

    #[test]
    fn boundary_gradient_is_tangential() {
        let m = mesh(20, 48);
        let u = ComplexField::from_polar(&m, |r, t| {
            Complex64::from_polar(1.0, 2.0 * t + 0.3 * (r * t).sin())
        });
        let g = gl_gradient(&u, 0.2).unwrap();
        for i in [0, 19] {
            for j in 0..48 {
                let dot = (g.at(i, j).conj() * u.at(i, j)).re;
                assert!(dot.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_rejects_inadmissible() {
        let m = mesh(16, 32);
        let u = ComplexField::constant(&m, Complex64::new(0.5, 0.0));
        assert!(matches!(gl_gradient(&u, 0.1), Err(Error::NotAdmissible { .. })));
    }

    #[test]
    fn renormalize_cases() {
        let m = mesh(16, 32);
        let mut u = ComplexField::constant(&m, Complex64::new(2.0, 0.0));
        let v = renormalize_boundary(&u).unwrap();
        assert_eq!(v.at(0, 0), Complex64::new(1.0, 0.0));
        assert_eq!(v.at(15, 5), Complex64::new(1.0, 0.0));
        assert_eq!(v.at(7, 5), Complex64::new(2.0, 0.0));
        let w = renormalize_boundary(&v).unwrap();
        assert_eq!(w.values, v.values);
        u.values[3] = Complex64::default();
        assert!(matches!(renormalize_boundary(&u), Err(Error::ZeroOnBoundary { i: 0, j: 3 })));
    }

    #[test]
    fn energy_change_matches_difference() {
        let m = mesh(20, 48);
        let u = ComplexField::from_polar(&m, |r, t| Complex64::from_polar(0.9 + 0.05 * r, t + 0.2 * (2.0 * t).sin()));
        let d: Vec<Complex64> = (0..m.len())
            .map(|k| Complex64::new((k as f64 * 0.3).sin(), (k as f64 * 0.7).cos()) * 0.01)
            .collect();
        let w: Vec<Complex64> = u.values.iter().zip(&d).map(|(a, b)| a + b).collect();
        let direct = energy_of(&m, &w, 0.2).total - energy_of(&m, &u.values, 0.2).total;
        let change = energy_change(&m, &u.values, &d, 0.2);
        assert!((direct - change).abs() < 1e-12 * direct.abs().max(1.0));
    }

    #[test]
    fn csv_export_header() {
        let m = mesh(16, 32);
        let u = ComplexField::constant(&m, Complex64::new(1.0, 0.0));
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("s,theta,re,im\n"));
        assert_eq!(text.lines().count(), 1 + 16 * 32);
    }
}
